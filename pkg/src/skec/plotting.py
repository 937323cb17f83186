"""Figure rendering for the report paths.

Figures are written next to the delimited output with a fixed style and
scrubbed metadata, so a rerun with the same config and seed produces
byte-identical image files.
"""

from __future__ import annotations


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


_SAVE_KW = dict(dpi=120, metadata={"Software": None})


def render_sweep_figure(rows: list[dict], columns: list[str], param: str,
                        out_path: str) -> None:
    """Rate curves: every bound column against the swept parameter."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    xs = [row["param_value"] for row in rows]
    for col in columns:
        ys = [row.get(col) for row in rows]
        if all(v is None for v in ys):
            continue
        ax.plot(xs, ys, marker="o", markersize=3.5, linewidth=1.2, label=col)
    ax.set_xlabel(f"{param} crossover")
    ax.set_ylabel("bits per channel use")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, **_SAVE_KW)
    plt.close(fig)


def render_simulate_figure(record: dict, key_counts: dict[int, int],
                           out_path: str) -> None:
    """Empirical key histogram plus session failure-mode tallies."""
    plt = _pyplot()
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.8))
    n_keys = 1 << int(record["kappa"])
    if n_keys <= 256:
        counts = [key_counts.get(k, 0) for k in range(n_keys)]
        ax1.bar(range(n_keys), counts, width=0.9)
        ax1.set_xlabel("key index")
    else:
        counts = sorted(key_counts.values(), reverse=True)
        ax1.bar(range(len(counts)), counts, width=0.9)
        ax1.set_xlabel("key (sorted by frequency)")
    ax1.set_ylabel("sessions")
    ax1.set_title(f"empirical key distribution (H = {record['key_entropy']:.3f} bits)",
                  fontsize=9)
    modes = ["ok", "bob_null", "alice_null", "decode_mismatch"]
    tallies = [record.get("count_" + m, 0) for m in modes]
    ax2.bar(modes, tallies, color=["#2a7", "#d95", "#d95", "#c33"])
    ax2.set_ylabel("sessions")
    ax2.set_title(f"outcomes (p_error = {record['p_error']:.4f})", fontsize=9)
    ax2.tick_params(axis="x", labelsize=8)
    fig.tight_layout()
    fig.savefig(out_path, **_SAVE_KW)
    plt.close(fig)
