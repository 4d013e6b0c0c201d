"""Plot dualpulse CSV outputs with matplotlib.

    python docs/plot_outputs.py out/scan-temperature-*.csv
    python docs/plot_outputs.py out/pulse-*-00.csv
"""
import sys

import matplotlib.pyplot as plt
import numpy as np


def load(path):
    with open(path) as f:
        lines = [l for l in f if not l.startswith("#")]
    header = lines[0].strip().split(",")
    data = np.genfromtxt(lines[1:], delimiter=",")
    return header, np.atleast_2d(data)


def plot_scan(ax, path, header, data):
    ax.errorbar(data[:, 0], data[:, 1], yerr=data[:, 2], marker="o", label=path)
    ax.set_xlabel("x")
    ax.set_ylabel("gate error")


def plot_pulse(ax, path, header, data):
    t = data[:, 0]
    for i, name in enumerate(header):
        if name.startswith("pop_"):
            ax.plot(t, data[:, i], label=name[4:])
    ax.set_xlabel("t (us)")
    ax.set_ylabel("population")
    ax2 = ax.twinx()
    ax2.plot(t, data[:, header.index("phase_ground_rad")], "k--", label="phase")
    ax2.set_ylabel("ground phase (rad)")


def main(paths):
    fig, ax = plt.subplots()
    for path in paths:
        header, data = load(path)
        if header[0] == "x":
            plot_scan(ax, path, header, data)
        else:
            plot_pulse(ax, path, header, data)
    ax.legend()
    plt.show()


if __name__ == "__main__":
    main(sys.argv[1:])
