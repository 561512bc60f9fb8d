# Test package
