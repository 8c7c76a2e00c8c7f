"""Figures written next to the CSV output (non-interactive Agg backend)."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 4.0),
    "figure.dpi": 120,
    "font.size": 9,
    "axes.linewidth": 0.6,
    "lines.linewidth": 1.2,
    "savefig.bbox": "tight",
}


def _save(fig, path):
    # fixed metadata keeps repeated runs byte-identical
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def scan_figure(result, path, centers=None):
    """Membership raster over complex ``eps`` with the resonance centres overlaid."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        if result.member.size:
            extent = [result.re[0], result.re[-1], result.im[0], result.im[-1]]
            ax.imshow(~result.member, origin="lower", extent=extent, cmap="gray_r", interpolation="nearest")
            circle = plt.Circle((0, 0), result.spec.r0, fill=False, lw=0.6, color="tab:blue")
            ax.add_patch(circle)
        if centers:
            z = np.array([c for _, c in centers])
            ax.plot(z.real, z.imag, ".", ms=2.0, color="tab:red", label="resonance centres")
            ax.legend(loc="upper right", fontsize=7, frameon=False)
        ax.set_xlabel(r"Re $\varepsilon$")
        ax.set_ylabel(r"Im $\varepsilon$")
        ax.set_aspect("equal")
        s = result.spec
        ax.set_title(f"a={s.a}, N={s.N}, A={s.A:g}, tau={s.tau:g}", fontsize=8)
        return _save(fig, path)


def convergence_figure(history, path):
    """Residual and drift correction per Newton step on a log scale."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        it = [h["iter"] for h in history]
        ax.semilogy(it, [h["previous_residual"] for h in history], "o-", label="residual before step")
        ax.semilogy(it, [max(h["residual"], 1e-300) for h in history], "s--", label="residual after step")
        ax.semilogy(it, [max(h["beta_norm"], 1e-300) for h in history], "^:", label="|beta|")
        ax.set_xlabel("Newton step")
        ax.legend(frameon=False, fontsize=7)
        return _save(fig, path)


def continuation_figure(eps, mu, residual, path):
    with plt.rc_context(STYLE):
        fig, (a1, a2) = plt.subplots(2, 1, sharex=True)
        a1.plot(eps, mu, "o-")
        a1.set_ylabel(r"$\mu$")
        a2.semilogy(eps, np.maximum(residual, 1e-300), "o-")
        a2.set_ylabel("residual")
        a2.set_xlabel(r"$\varepsilon$")
        return _save(fig, path)
