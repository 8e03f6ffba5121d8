"""
Convergence plots from the CSV files written by `manage.py run_experiment`.

Usage: python plot_convergence.py [directory]

Produces, next to the CSVs:
  convergence.png  consensus violation, dual residual and ‖x − x*‖∞ per iteration
  cost.png         generation cost and losses per iteration
  coupling.png     AC copy minus MTDC copy for every consensus row
"""

import sys
from pathlib import Path

import matplotlib

matplotlib.use('Agg')

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402


def plot_metrics(convergence, directory):
    metrics = [
        ('consensus_violation', r'$\|\sum_\ell A_\ell x_\ell\|_\infty$'),
        ('dual_residual', r'dual residual $\|r\|_\infty$'),
        ('distance', r'$\|x - x^*\|_\infty$'),
    ]
    fig, axes = plt.subplots(1, len(metrics), figsize=(15, 4))
    for ax, (column, title) in zip(axes, metrics):
        for algorithm, rows in convergence.groupby('algorithm'):
            values = rows[column].abs()
            if values.notna().any():
                ax.semilogy(rows['iteration'], values.clip(lower=1e-16), label=algorithm)
        ax.set_title(title)
        ax.set_xlabel('iteration')
        ax.grid(True, which='both', alpha=0.3)
    axes[0].legend()
    fig.tight_layout()
    fig.savefig(directory / 'convergence.png', dpi=150)
    plt.close(fig)


def plot_costs(convergence, directory):
    fig, (cost_ax, loss_ax) = plt.subplots(1, 2, figsize=(11, 4))
    for algorithm, rows in convergence.groupby('algorithm'):
        cost_ax.plot(rows['iteration'], rows['cost'], label=algorithm)
        loss_ax.plot(rows['iteration'], rows['losses'], label=algorithm)
    cost_ax.set_title('generation cost ($)')
    loss_ax.set_title('losses (MW)')
    for ax in (cost_ax, loss_ax):
        ax.set_xlabel('iteration')
        ax.grid(True, alpha=0.3)
    cost_ax.legend()
    fig.tight_layout()
    fig.savefig(directory / 'cost.png', dpi=150)
    plt.close(fig)


def plot_coupling(coupling, directory):
    algorithms = list(coupling['algorithm'].unique())
    fig, axes = plt.subplots(1, len(algorithms), figsize=(6 * len(algorithms), 4), squeeze=False)
    for ax, algorithm in zip(axes[0], algorithms):
        rows = coupling[coupling['algorithm'] == algorithm]
        for label, series in rows.groupby('label'):
            ax.plot(series['iteration'], series['difference'], linewidth=0.8, label=label)
        ax.set_title(f'{algorithm}: AC copy − MTDC copy')
        ax.set_xlabel('iteration')
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(directory / 'coupling.png', dpi=150)
    plt.close(fig)


def main(directory):
    directory = Path(directory)
    convergence = pd.read_csv(directory / 'convergence.csv')
    coupling = pd.read_csv(directory / 'coupling.csv')
    if convergence.empty:
        print(f"No iterations recorded in {directory}.")
        return
    plot_metrics(convergence, directory)
    plot_costs(convergence, directory)
    if not coupling.empty:
        plot_coupling(coupling, directory)


if __name__ == '__main__':
    main(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).resolve().parent)
