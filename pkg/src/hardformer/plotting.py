"""SVG figures of planar trajectories.

Initial tokens are drawn as hollow circles, final tokens as filled
circles and leaders as stars, over the outline of the initial convex
hull. Every token marker carries the SVG id ``token-<i>`` (initial) or
``final-<i>`` (final), so the figure can be checked for completeness.
"""

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .clusters import LeaderRecord  # noqa: E402
from .dynamics import TrajectoryRecord  # noqa: E402
from .errors import DimensionMismatchError  # noqa: E402
from .geometry import convex_hull_2d  # noqa: E402

logger = logging.getLogger(__name__)

PALETTE = ["#0C5DA5", "#00A08A", "#F2AD00", "#B40F20"]

STYLE = {
    "font.size": 10,
    "axes.linewidth": 0.8,
    "svg.hashsalt": "hardformer",
    "svg.fonttype": "none",
}


def write_trajectory_svg(
    trajectory: TrajectoryRecord,
    path: Path,
    leaders: list[LeaderRecord] | None = None,
) -> Path:
    """Draws the initial and final positions of a planar run.

    Args:
        trajectory: A trajectory in R^2.
        path: Destination of the SVG file.
        leaders: Leaders to mark with stars; none when omitted.

    Returns:
        The written path.

    Raises:
        DimensionMismatchError: The tokens are not two-dimensional.
    """
    if trajectory.initial.dimension != 2:
        raise DimensionMismatchError("SVG figures need d = 2.")
    initial = trajectory.initial.tokens
    final = trajectory.final.tokens
    leader_ids = {lead.token_index for lead in leaders or ()}

    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 5))
        hull = convex_hull_2d(initial)
        xs = [p[0] for p in hull] + [hull[0][0]]
        ys = [p[1] for p in hull] + [hull[0][1]]
        ax.plot(xs, ys, color="0.6", linestyle="--", linewidth=0.8,
                gid="hull")

        for i, (start, end) in enumerate(zip(initial, final)):
            ax.plot([start[0], end[0]], [start[1], end[1]],
                    color=PALETTE[0], alpha=0.3, linewidth=0.6)
            ax.plot(start[0], start[1], "o", markerfacecolor="none",
                    markeredgecolor=PALETTE[0], markersize=5,
                    gid=f"token-{i}")
            if i in leader_ids:
                ax.plot(end[0], end[1], "*", color=PALETTE[3],
                        markersize=11, gid=f"final-{i}")
            else:
                ax.plot(end[0], end[1], "o", color=PALETTE[1],
                        markersize=4, gid=f"final-{i}")

        ax.set_aspect("equal", adjustable="datalim")
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        ax.set_title(
            f"alpha = {trajectory.spec.alpha:g}, "
            f"{trajectory.steps_taken} steps"
        )
        for spine in ("top", "right"):
            ax.spines[spine].set_visible(False)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    logger.info(f"Wrote figure to {path}")
    return path
