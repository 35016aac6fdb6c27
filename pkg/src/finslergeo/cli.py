"""Command-line front end.

    finslergeo <subcommand> <scene.json> [flags]

Subcommands: probe, berwald, obstruction, causal, nonmetricity, report
(report runs everything applicable).  The machine-readable output is written
to <out>/report.json; a short human-readable summary goes to stdout.

Exit codes: 0 success, 1 errors, 2 when a diagnostic proves
non-metrizability (skew Ricci beyond tolerance), so shell pipelines can
branch on the verdict.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__, scene as scenemod
from .scene import SceneError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="finslergeo",
        description="pseudo-Finsler geometry diagnostics on tangent-bundle samples",
    )
    parser.add_argument("--version", action="version", version=f"finslergeo {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, help_text in [
        ("probe", "admissibility and metric signature per sample"),
        ("berwald", "Berwald detection at each sample's base point"),
        ("obstruction", "Berwald detection plus the skew-Ricci obstruction"),
        ("causal", "causal classification of a family instance"),
        ("nonmetricity", "non-metricity of a reference metric under the connection"),
        ("report", "all applicable diagnostics"),
    ]:
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("scene", help="scene JSON file")
        sp.add_argument("--tol-berwald", type=float, default=None, metavar="TOL")
        sp.add_argument("--tol-sym", type=float, default=None, metavar="TOL")
        sp.add_argument("--tol-degenerate", type=float, default=None, metavar="TOL")
        sp.add_argument("--tol-null", type=float, default=None, metavar="TOL")
        sp.add_argument("--directions", type=int, default=None, metavar="N")
        sp.add_argument("--seed", type=int, default=None, metavar="SEED")
        sp.add_argument(
            "--signature-convention", choices=["+---", "-+++"], default=None
        )
        sp.add_argument("--threads", type=int, default=None, metavar="N")
        sp.add_argument(
            "--out",
            default=None,
            metavar="DIR",
            help="output directory (default: FINSLER_OUT_DIR or '.')",
        )
    return parser


def _apply_flag_overrides(scene, args):
    opts = scene.options
    updates = {}
    if args.tol_berwald is not None:
        updates["tol_berwald"] = args.tol_berwald
    if args.tol_sym is not None:
        updates["tol_sym"] = args.tol_sym
    if args.tol_degenerate is not None:
        updates["tol_degenerate"] = args.tol_degenerate
    if args.tol_null is not None:
        updates["tol_null"] = args.tol_null
    if args.directions is not None:
        updates["directions"] = args.directions
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.signature_convention is not None:
        updates["signature_convention"] = args.signature_convention
    if args.threads is not None:
        updates["threads"] = args.threads
    if updates:
        scene = replace(scene, options=replace(opts, **updates))
    return scene


def _summary_lines(report: dict, exit_code: int) -> list[str]:
    meta = report["metadata"]
    lines = [
        f"finslergeo {meta['version']} — {meta['subcommand']}"
        f" (seed {meta['seed']}, {meta['directions']} directions)"
    ]
    header = f"{'sample':<16} {'in_A':<5} {'in_T':<5} {'L':>14} {'signature':>12}"
    lines.append(header)
    for s in report.get("samples", []):
        adm = s["admissibility"]
        lval = adm["L"]
        sig = s.get("metric", {}).get("signature")
        lines.append(
            f"{s['label']:<16} {str(adm['in_A']):<5} {str(adm['in_T']):<5} "
            f"{'-' if lval is None else format(lval, '.6g'):>14} "
            f"{'-' if sig is None else str(tuple(sig)):>12}"
        )
    geo = report.get("geometry", {})
    if "berwald" in geo:
        b = geo["berwald"]
        dev = b["max_gamma_deviation"]
        lines.append(
            f"berwald: {'YES' if b['is_berwald'] else 'NO'}"
            + (f" (max deviation {dev:.3e})" if dev is not None else "")
        )
    if "obstruction" in geo:
        o = geo["obstruction"]
        met = o["metrizability_necessary_condition_met"]
        mx = o["max_skew_abs"]
        lines.append(
            "obstruction: skew max "
            + ("-" if mx is None else f"{mx:.6g}")
            + (" — necessary condition met" if met else " — NON-METRIZABLE")
        )
    if "family_proposition" in geo:
        p = geo["family_proposition"]
        lines.append(
            "family proposition: "
            + ("non-metrizable (f != 0 and beta^dH != 0)" if p["fires"] else "inconclusive")
        )
    if "causal" in geo:
        c = geo["causal"]
        lines.append(f"causal: {'viable' if c['viable'] else 'NOT viable'}")
    if "nonmetricity" in geo:
        qs = [
            e["Q_norm"] for e in geo["nonmetricity"]["per_base_point"] if "Q_norm" in e
        ]
        if qs:
            lines.append(f"nonmetricity: max |Q| = {max(qs):.6g}")
    for w in report.get("warnings", []):
        lines.append(f"warning: {w}")
    lines.append(f"exit code {exit_code}")
    return lines


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        scene = scenemod.load_scene_file(args.scene)
        scene = _apply_flag_overrides(scene, args)
        report, exit_code = scenemod.run_scene(scene, args.subcommand)
    except SceneError as err:
        print(f"scene error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    out_dir = Path(args.out or os.environ.get("FINSLER_OUT_DIR") or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "report.json"
    out_path.write_text(scenemod.render_json(report) + "\n", encoding="utf-8")
    for line in _summary_lines(report, exit_code):
        print(line)
    print(f"report written to {out_path}")
    return exit_code


if __name__ == "__main__":
    raise SystemExit(main())
