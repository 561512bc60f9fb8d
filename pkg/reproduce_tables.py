"""Run every table configuration of the numerical study and write one CSV per table"""
import argparse
import logging
from pathlib import Path

from ppifem.cli import run_study
from ppifem.schemas import RunConfig

PRESETS = [
    ("ex1_interp_10_1_100", dict(example=1, betas=(10, 1, 100), scheme="interpolation")),
    ("ex1_ppifem_10_1_100", dict(example=1, betas=(10, 1, 100), scheme="ppifem")),
    ("ex1_galerkin_10_1_100", dict(example=1, betas=(10, 1, 100), scheme="galerkin")),
    ("ex1_ppifem_100_10000_1", dict(example=1, betas=(100, 10000, 1), scheme="ppifem")),
    ("ex1_galerkin_100_10000_1", dict(example=1, betas=(100, 10000, 1), scheme="galerkin")),
    ("ex2_interp_10_1_100", dict(example=2, betas=(10, 1, 100), scheme="interpolation")),
    ("ex2_ppifem_10_1_100", dict(example=2, betas=(10, 1, 100), scheme="ppifem")),
    ("ex2_galerkin_10_1_100", dict(example=2, betas=(10, 1, 100), scheme="galerkin")),
    ("ex2_ppifem_100000_100_10", dict(example=2, betas=(100000, 100, 10), scheme="ppifem")),
    ("ex2_galerkin_100000_100_10", dict(example=2, betas=(100000, 100, 10), scheme="galerkin")),
]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", type=Path, default=Path("results"))
    parser.add_argument("--full", action="store_true", help="include N=512")
    parser.add_argument("--only", nargs="*", help="subset of preset names")
    args = parser.parse_args()
    logging.basicConfig(level=logging.WARNING)

    print("=" * 60)
    print("  ppifem - reproducing the convergence tables")
    print("=" * 60)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for name, preset in PRESETS:
        if args.only and name not in args.only:
            continue
        print(f"\n📐 {name}")
        config = RunConfig(**preset, full=args.full, out_errors=args.out_dir / f"{name}.csv")
        run_study(config)
    print(f"\n✅ Tables written to {args.out_dir}/")


if __name__ == "__main__":
    main()
