"""
Static figure rendering from exported result tables.

Every figure is drawn from a CSV table already on disk (or in memory), so
plots can be regenerated without re-running a scenario.
"""

import time
from typing import Dict, Mapping, Optional, Sequence

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np

from .export_handler_base import ExportContext, ExportError, ExportResult, ResultTable
from .export_handler_csv import column_array

STYLE = {
    'font.size': 10, 'axes.labelsize': 11, 'axes.titlesize': 12,
    'legend.fontsize': 8, 'figure.dpi': 100, 'savefig.dpi': 150,
    'savefig.bbox': 'tight', 'lines.linewidth': 1.4,
}
STABLE_COLOR = '#2E7D32'
UNSTABLE_COLOR = '#C62828'


class PlotRenderer:
    """Renders PNG figures into the context's output directory."""

    def __init__(self, context: ExportContext):
        self.context = context
        plt.rcParams.update(STYLE)

    def _save(self, fig, name: str, start: float, metadata: Dict) -> ExportResult:
        path = self.context.output_directory / f"{name}.png"
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            fig.savefig(path)
        except OSError as e:
            self.context.log_error(f"Figure {name} failed: {e}")
            return ExportResult.failure_result(f"Figure {name} failed: {e}")
        finally:
            plt.close(fig)
        self.context.log_info(f"Rendered {path.name}")
        return ExportResult.success_result(path, time.perf_counter() - start, {'format': 'png', **metadata})

    def _guard(self, name: str, draw) -> ExportResult:
        start = time.perf_counter()
        try:
            fig, metadata = draw()
        except (ExportError, KeyError, ValueError) as e:
            self.context.log_error(f"Figure {name} failed: {e}")
            return ExportResult.failure_result(f"Figure {name} failed: {e}")
        return self._save(fig, name, start, metadata)

    def render_trajectory(
        self,
        table: ResultTable,
        controls: Sequence[str],
        name: str = 'trajectory',
        threshold: Optional[float] = None,
    ) -> ExportResult:
        """Objective, predicted DI and controls against iteration."""
        def draw():
            it = column_array(table, 'iteration')
            fig, axes = plt.subplots(3, 1, figsize=(7, 8), sharex=True)
            axes[0].plot(it, column_array(table, 'phi'), color='#1565C0')
            axes[0].set_ylabel('objective')
            g_hat = column_array(table, 'g_hat')
            if np.all(np.isnan(g_hat)):
                axes[1].text(0.5, 0.5, 'no stability surrogate', ha='center', va='center',
                             transform=axes[1].transAxes)
            else:
                axes[1].plot(it, g_hat, color='#6A1B9A')
                if threshold is not None:
                    axes[1].axhline(threshold, color='k', linestyle='--', linewidth=0.8)
            axes[1].set_ylabel('predicted DI')
            for label in controls:
                axes[2].plot(it, column_array(table, f"u_{label}"), label=label)
            axes[2].set_ylabel('controls (p.u.)')
            axes[2].set_xlabel('iteration')
            axes[2].legend(ncol=len(controls))
            for ax in axes:
                ax.grid(True, alpha=0.3)
            fig.suptitle(table.title or 'Controller trajectory')
            return fig, {'iterations': len(table)}
        return self._guard(name, draw)

    def render_modal_map(
        self,
        tables: Mapping[str, ResultTable],
        name: str = 'modal_map',
        re_min: Optional[float] = None,
    ) -> ExportResult:
        """Eigenvalues of several runs in the complex plane, critical modes highlighted."""
        def draw():
            fig, ax = plt.subplots(figsize=(7, 5))
            for label, table in tables.items():
                re, im = column_array(table, 're'), column_array(table, 'im')
                critical = np.array([bool(c) for c in table.column('critical')], dtype=bool)
                points = ax.scatter(re[~critical], im[~critical], s=10, alpha=0.35)
                ax.scatter(re[critical], im[critical], s=28, marker='x',
                           color=points.get_facecolor()[0], label=label)
            ax.axvline(0.0, color='k', linewidth=0.8)
            if re_min is not None:
                ax.set_xlim(left=re_min)
            ax.set_xlabel('Re (1/s)')
            ax.set_ylabel('Im (rad/s)')
            ax.set_title('Modal map')
            ax.legend()
            ax.grid(True, alpha=0.3)
            return fig, {'runs': len(tables)}
        return self._guard(name, draw)

    def render_voltage_profiles(
        self,
        tables: Mapping[str, ResultTable],
        name: str = 'voltage_profiles',
        limits: Optional[Sequence[float]] = None,
    ) -> ExportResult:
        """Bus voltage magnitudes of several runs."""
        def draw():
            fig, ax = plt.subplots(figsize=(7, 4))
            for label, table in tables.items():
                ax.plot(column_array(table, 'bus'), column_array(table, 'vm_pu'), 'o-', label=label,
                        markersize=4)
            if limits is not None:
                for v in limits:
                    ax.axhline(v, color='k', linestyle='--', linewidth=0.8)
            ax.set_xlabel('bus')
            ax.set_ylabel('|V| (p.u.)')
            ax.set_title('Voltage profiles')
            ax.legend(fontsize=7)
            ax.grid(True, alpha=0.3)
            return fig, {'runs': len(tables)}
        return self._guard(name, draw)

    def render_stability_scatter(
        self,
        table: ResultTable,
        x_column: str,
        y_column: str,
        name: str,
        title: str = '',
        di_column: str = 'DI_exact',
    ) -> ExportResult:
        """Two quantities coloured by the stability verdict DI < 1."""
        def draw():
            x, y = column_array(table, x_column), column_array(table, y_column)
            di = column_array(table, di_column)
            valid = ~np.isnan(di)
            stable = valid & (di < 1.0)
            unstable = valid & (di >= 1.0)
            fig, ax = plt.subplots(figsize=(6, 5))
            ax.scatter(x[stable], y[stable], s=12, color=STABLE_COLOR, label='stable')
            ax.scatter(x[unstable], y[unstable], s=12, color=UNSTABLE_COLOR, label='unstable')
            ax.set_xlabel(x_column)
            ax.set_ylabel(y_column)
            ax.set_title(title or f'{y_column} vs {x_column}')
            ax.legend()
            ax.grid(True, alpha=0.3)
            return fig, {'stable': int(stable.sum()), 'unstable': int(unstable.sum())}
        return self._guard(name, draw)
