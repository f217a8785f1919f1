"""Genotype vs phenotype sizes for the bundled architectures.

Factorized layers store two thin factors per weight matrix, so the evolved
genotype is a small fraction of the network that actually runs.
"""

import argparse

from factorevo.envs.lm import data_path
from factorevo.layers import ArchitectureSpec, count_params
from factorevo.transformer import config_of

FAMILIES = ("atari", "carracing", "tiletrack", "transformer", "desk_lm")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--family", choices=FAMILIES, nargs="+", default=list(FAMILIES))
    args = ap.parse_args()

    print(f"{'architecture':28s} {'genotype':>10s} {'phenotype':>10s} {'ratio':>7s}")
    for fam in args.family:
        for rep in ("nonfactorized", "factorized", "small"):
            arch = ArchitectureSpec.load(data_path(f"archs/{fam}_{rep}.json"))
            g, p = count_params(arch, "genotype"), count_params(arch, "phenotype")
            print(f"{arch.name:28s} {g:>10,d} {p:>10,d} {g / p:>7.3f}")
        if fam in ("transformer", "desk_lm"):
            print(f"  ({config_of(arch).describe()})")


if __name__ == "__main__":
    main()
