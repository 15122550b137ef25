"""
Mean-toxicity-over-time charts.

Figures are built on a bare ``Figure`` with the SVG canvas, so nothing
depends on pyplot state. Output is byte-stable: a fixed hash salt names
the SVG ids and no date is embedded.
"""
import logging

import matplotlib
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

logger = logging.getLogger(__name__)

HASH_SALT = 'toxhub'


class PlotError(ValueError):
    pass


def build_figure(series):
    """One line per MetricsSeries: weeks on x, mean toxicity on y"""
    series = list(series)
    if not series:
        raise PlotError('at least one series is needed to plot')

    fig = Figure(figsize=(7, 4.5))
    FigureCanvasSVG(fig)
    ax = fig.add_subplot(1, 1, 1)
    for i, s in enumerate(series):
        if not len(s):
            raise PlotError(f'series {s.run_id} has no records')
        line, = ax.plot(s.weeks, s.means, marker='o', markersize=3, label=s.run_id)
        line.set_gid(f'toxicity-series-{i}')
    ax.set_xlabel('Week')
    ax.set_ylabel('Mean toxicity')
    ax.set_ylim(bottom=0)
    ax.grid(True, alpha=0.3)
    ax.legend(loc='best', fontsize='small')
    fig.tight_layout()
    return fig


def emit_plot(series, path):
    fig = build_figure(series)
    with matplotlib.rc_context({'svg.hashsalt': HASH_SALT, 'svg.fonttype': 'path'}):
        fig.savefig(path, format='svg', metadata={'Date': None})
    logger.info(f'Plot written to {path}')
    return path
