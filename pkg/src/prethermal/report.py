"""Result emission: deterministic CSV files, figures, and a hash manifest.

CSV bytes are a pure function of the bundle (floats rendered with repr, which
is shortest-round-trip and platform-stable), so identical config + seed gives
byte-identical files.  Figures are rendered alongside for quick inspection;
they are listed in the manifest but not hashed (PNG encoders are not part of
the determinism contract).
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

__all__ = ["write_results", "render_figures"]


def _fmt(value):
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        return repr(value)
    return value


def _write_csv(path: str, rows, fieldnames=None) -> None:
    if fieldnames is None:
        fieldnames = list(rows[0].keys()) if rows else []
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(v) for k, v in row.items()})
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _ratio_tag(ratio: float) -> str:
    return ("%g" % ratio).replace(".", "p")


def write_results(bundle: dict, outdir: str, figures: bool = True) -> dict:
    """Write the bundle under ``outdir``; returns the manifest dict."""
    os.makedirs(outdir, exist_ok=True)
    csv_files = []

    echo_path = os.path.join(outdir, "config_echo.toml")
    with open(echo_path, "w") as fh:
        fh.write(bundle["config_echo"])

    if bundle.get("summary"):
        path = os.path.join(outdir, "summary.csv")
        _write_csv(path, bundle["summary"])
        csv_files.append(path)

    for ratio, rows in sorted(bundle.get("ledgers", {}).items()):
        if not rows:
            continue
        path = os.path.join(outdir, f"ledger_r{_ratio_tag(ratio)}.csv")
        _write_csv(path, rows)
        csv_files.append(path)

    for ratio, rows in sorted(bundle.get("series", {}).items()):
        if not rows:
            continue
        path = os.path.join(outdir, f"series_r{_ratio_tag(ratio)}.csv")
        _write_csv(path, rows)
        csv_files.append(path)

    if "trend" in bundle:
        path = os.path.join(outdir, "trend.csv")
        _write_csv(path, [bundle["trend"]])
        csv_files.append(path)

    figure_files = render_figures(bundle, outdir) if figures else []

    manifest = {
        "preset": bundle.get("preset"),
        "theorem": bundle.get("theorem"),
        "nu0": bundle.get("nu0"),
        "files": {os.path.basename(p): _sha256(p) for p in csv_files},
        "figures": [os.path.basename(p) for p in figure_files],
    }
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def render_figures(bundle: dict, outdir: str) -> list:
    """Figures rendered next to the CSVs: lifetime trend, deviation series,
    and the per-step ledger decay."""
    out = []

    summary = bundle.get("summary", [])
    taus = [(r["nu_ratio"], r.get("tau_dressed"), r.get("tau_bare"))
            for r in summary if "tau_dressed" in r]
    finite = [(x, d, b) for x, d, b in taus if d is not None]
    if finite:
        fig, ax = plt.subplots(figsize=(5, 3.5))
        xs = [p[0] for p in finite]
        ax.semilogy(xs, [p[1] for p in finite], "o-", label="dressed")
        ax.semilogy(xs, [p[2] for p in finite], "s--", label="bare")
        ax.set_xlabel(r"$\nu/\nu_0$")
        ax.set_ylabel(r"$\tau$ (periods)")
        ax.legend()
        fig.tight_layout()
        path = os.path.join(outdir, "fig_lifetimes.png")
        fig.savefig(path, dpi=120)
        plt.close(fig)
        out.append(path)

    series = bundle.get("series", {})
    if series:
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for ratio, rows in sorted(series.items()):
            ks = [r["periods"] for r in rows]
            ax.loglog(ks, [max(r["dressed"], 1e-18) for r in rows],
                      label=f"r={ratio:g}")
        ax.set_xlabel("periods")
        ax.set_ylabel("dressed charge deviation / site")
        ax.legend(fontsize=7)
        fig.tight_layout()
        path = os.path.join(outdir, "fig_series.png")
        fig.savefig(path, dpi=120)
        plt.close(fig)
        out.append(path)

    ledgers = bundle.get("ledgers", {})
    if ledgers:
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for ratio, rows in sorted(ledgers.items()):
            if not rows:
                continue
            ax.semilogy([r["n"] for r in rows],
                        [max(r["norm_V"], 1e-18) for r in rows],
                        "o-", label=f"r={ratio:g}")
        ax.set_xlabel("step n")
        ax.set_ylabel(r"$\|V_n\|_{\kappa_n}$")
        ax.legend(fontsize=7)
        fig.tight_layout()
        path = os.path.join(outdir, "fig_ledger.png")
        fig.savefig(path, dpi=120)
        plt.close(fig)
        out.append(path)

    return out
