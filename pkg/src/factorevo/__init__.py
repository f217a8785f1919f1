"""Neuroevolution with low-rank factorized genotypes and seed-chain genomes."""

__version__ = "0.1.0"
