#!/usr/bin/env python3
"""Plot an mmloco trajectory CSV: joint references, body pose and phase portraits."""

import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd

LEGS = ["FL", "FR", "BR", "BL"]


def joints(df, out):
    fig, axes = plt.subplots(3, 1, sharex=True, figsize=(9, 7))
    for leg in LEGS:
        for ax, dof in zip(axes, ["phi", "psi", "l"]):
            ax.plot(df.t, df[f"{leg}_{dof}"], label=leg)
            ax.set_ylabel(dof)
    axes[0].legend(ncol=4)
    axes[-1].set_xlabel("t [s]")
    fig.savefig(out / "joints.png", dpi=120)


def pose(df, out):
    fig, axes = plt.subplots(2, 1, sharex=True, figsize=(9, 6))
    for c in ["r_x", "r_y", "r_z"]:
        axes[0].plot(df.t, df[c], label=c)
    for c in ["q_w", "q_x", "q_y", "q_z"]:
        axes[1].plot(df.t, df[c], label=c)
    for ax in axes:
        ax.legend(ncol=4)
    axes[-1].set_xlabel("t [s]")
    fig.savefig(out / "pose.png", dpi=120)


def portraits(df, out):
    walk = df[df.gait_clock >= 0]
    fig, axes = plt.subplots(1, 3, figsize=(12, 4))
    for ax, (x, v) in zip(axes, [("r_x", "v_x"), ("r_y", "v_y"), ("r_z", "v_z")]):
        ax.plot(walk[x], walk[v], lw=0.6)
        ax.set_xlabel(x)
        ax.set_ylabel(v)
    fig.tight_layout()
    fig.savefig(out / "phase_portraits.png", dpi=120)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("log", type=Path)
    ap.add_argument("-o", "--out", type=Path, default=Path("."))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    df = pd.read_csv(args.log)
    joints(df, args.out)
    pose(df, args.out)
    portraits(df, args.out)


if __name__ == "__main__":
    main()
