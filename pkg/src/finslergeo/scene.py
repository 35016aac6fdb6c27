"""Scene files, diagnostics orchestration, and the serialized report.

A scene is a JSON document naming a Lagrangian (catalog reference, inline
family data, or a raw expression), tangent samples, and options.  Running a
scene produces a report dictionary whose canonical serialization is
byte-stable: floats are emitted with 17 significant digits (lossless for
IEEE doubles) and key order is fixed by construction.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from . import __version__
from . import alphabeta, berwald, catalog, expr as exprmod, geometry
from .berwald import NoAdmissibleDirections, NotBerwald
from .defs import DslLagrangian, FamilyInstance, LagrangianDef, TangentSample, fiber_aliases
from .expr import ExprDomainError
from .geometry import DegenerateMetric
from .jets import DomainError

SUBCOMMANDS = ("probe", "berwald", "obstruction", "causal", "nonmetricity", "report")

_SAMPLE_ERRORS = (
    DomainError,
    ExprDomainError,
    DegenerateMetric,
    NotBerwald,
    NoAdmissibleDirections,
)


class SceneError(ValueError):
    """Scene validation failure; `pointer` is a JSON pointer into the file."""

    def __init__(self, pointer: str, message: str):
        self.pointer = pointer
        super().__init__(f"{pointer}: {message}")


@dataclass(frozen=True)
class SceneOptions:
    tol_berwald: float = berwald.TOL_BERWALD
    tol_sym: float = berwald.TOL_SYM
    tol_degenerate: float = geometry.TOL_DEGENERATE
    tol_null: float = geometry.TOL_NULL
    directions: int = berwald.DEFAULT_DIRECTIONS
    spread: float = berwald.DEFAULT_SPREAD
    seed: int = 0
    signature_convention: str = "+---"
    threads: int = 1
    reference_metric: Optional[tuple] = None  # expression matrix
    reference_metric_src: Optional[tuple] = None


@dataclass(frozen=True)
class Scene:
    dim: int
    aliases: Optional[Mapping[str, int]]
    lagrangian: LagrangianDef
    catalog_name: Optional[str]
    samples: tuple[tuple[str, TangentSample], ...]
    options: SceneOptions


# -- validation helpers ---------------------------------------------------------


def _expect(cond: bool, pointer: str, message: str):
    if not cond:
        raise SceneError(pointer, message)


def _get(obj, key, pointer, typ=None, required=True, default=None):
    if key not in obj:
        _expect(not required, f"{pointer}/{key}", "missing required field")
        return default
    val = obj[key]
    if typ is not None:
        _expect(
            isinstance(val, typ),
            f"{pointer}/{key}",
            f"expected {getattr(typ, '__name__', typ)}, got {type(val).__name__}",
        )
    return val


def _float_list(val, pointer, length=None):
    _expect(isinstance(val, list), pointer, "expected an array of numbers")
    if length is not None:
        _expect(len(val) == length, pointer, f"expected {length} entries, got {len(val)}")
    out = []
    for i, v in enumerate(val):
        _expect(
            isinstance(v, (int, float)) and not isinstance(v, bool),
            f"{pointer}/{i}",
            "expected a number",
        )
        out.append(float(v))
    return out


def _parse_expr(src, dim, pointer, params=(), aliases=None):
    _expect(isinstance(src, str), pointer, "expected an expression string")
    try:
        return exprmod.parse(src, dim, params, aliases)
    except (exprmod.ExprSyntaxError, exprmod.ExprNameError) as err:
        raise SceneError(pointer, str(err)) from err


# -- scene loading ----------------------------------------------------------------


def load_scene(obj: Mapping) -> Scene:
    """Validate a parsed scene document and build the runtime objects."""
    _expect(isinstance(obj, dict), "", "scene must be a JSON object")
    lag_obj = _get(obj, "lagrangian", "", dict)

    chart = _get(obj, "chart", "", dict, required=False)
    aliases = None
    chart_dim = None
    if chart is not None:
        chart_dim = _get(chart, "dim", "/chart", int)
        _expect(chart_dim >= 1, "/chart/dim", "dimension must be >= 1")
        alias_list = _get(chart, "aliases", "/chart", list, required=False)
        if alias_list is not None:
            _expect(
                len(alias_list) == chart_dim,
                "/chart/aliases",
                f"expected {chart_dim} names",
            )
            aliases = {}
            for i, name in enumerate(alias_list):
                _expect(
                    isinstance(name, str) and name != "",
                    f"/chart/aliases/{i}",
                    "expected a nonempty string",
                )
                aliases[name] = i

    kinds = [k for k in ("catalog", "family", "dsl") if k in lag_obj]
    _expect(
        len(kinds) == 1,
        "/lagrangian",
        "exactly one of 'catalog', 'family', 'dsl' is required",
    )
    kind = kinds[0]
    catalog_name = None
    entry_samples: tuple = ()

    if kind == "catalog":
        catalog_name = _get(lag_obj, "catalog", "/lagrangian", str)
        overrides = _get(lag_obj, "overrides", "/lagrangian", dict, required=False, default={})
        try:
            entry = catalog.get(catalog_name, overrides)
        except (catalog.UnknownEntry, catalog.InvalidOverride, ValueError) as err:
            raise SceneError("/lagrangian/catalog", str(err)) from err
        lag = entry.lagrangian
        dim = entry.dim
        aliases = dict(entry.aliases) if entry.aliases else aliases
        entry_samples = tuple(
            (f"default-{i}", s) for i, s in enumerate(entry.default_samples)
        )
        if chart_dim is not None:
            _expect(
                chart_dim == dim,
                "/chart/dim",
                f"catalog entry {catalog_name!r} has dimension {dim}",
            )
    elif kind == "family":
        _expect(chart_dim is not None, "/chart", "a chart is required for family scenes")
        dim = chart_dim
        fam = _get(lag_obj, "family", "/lagrangian", dict)
        params = _get(fam, "params", "/lagrangian/family", dict, required=False, default={})
        pnames = set(params)
        alpha_rows = _get(fam, "alpha", "/lagrangian/family", list)
        _expect(len(alpha_rows) == dim, "/lagrangian/family/alpha", f"expected {dim} rows")
        alpha = []
        for i, row in enumerate(alpha_rows):
            _expect(
                isinstance(row, list) and len(row) == dim,
                f"/lagrangian/family/alpha/{i}",
                f"expected {dim} entries",
            )
            alpha.append(
                tuple(
                    _parse_expr(src, dim, f"/lagrangian/family/alpha/{i}/{j}", pnames, aliases)
                    for j, src in enumerate(row)
                )
            )
        beta_row = _get(fam, "beta", "/lagrangian/family", list)
        _expect(len(beta_row) == dim, "/lagrangian/family/beta", f"expected {dim} entries")
        beta = tuple(
            _parse_expr(src, dim, f"/lagrangian/family/beta/{j}", pnames, aliases)
            for j, src in enumerate(beta_row)
        )
        h_src = _get(fam, "H", "/lagrangian/family", str, required=False)
        h_ast = (
            _parse_expr(h_src, dim, "/lagrangian/family/H", pnames, aliases)
            if h_src is not None
            else None
        )
        try:
            lag = FamilyInstance(
                dim,
                tuple(alpha),
                beta,
                c=float(_get(fam, "c", "/lagrangian/family", (int, float))),
                m=float(_get(fam, "m", "/lagrangian/family", (int, float))),
                p=float(_get(fam, "p", "/lagrangian/family", (int, float))),
                h_expr=h_ast,
                params={k: float(v) for k, v in params.items()},
            )
        except ValueError as err:
            raise SceneError("/lagrangian/family", str(err)) from err
    else:
        _expect(chart_dim is not None, "/chart", "a chart is required for dsl scenes")
        dim = chart_dim
        dsl = _get(lag_obj, "dsl", "/lagrangian", dict)
        params = _get(dsl, "params", "/lagrangian/dsl", dict, required=False, default={})
        src = _get(dsl, "source", "/lagrangian/dsl", str)
        ast = _parse_expr(
            src, 2 * dim, "/lagrangian/dsl/source", set(params), fiber_aliases(dim, aliases)
        )
        lag = DslLagrangian(dim, ast, {k: float(v) for k, v in params.items()})

    samples_obj = _get(obj, "samples", "", list, required=False)
    samples: list[tuple[str, TangentSample]] = []
    if samples_obj:
        for i, s in enumerate(samples_obj):
            _expect(isinstance(s, dict), f"/samples/{i}", "expected an object")
            xs = _float_list(_get(s, "x", f"/samples/{i}", list), f"/samples/{i}/x", dim)
            vs = _float_list(
                _get(s, "xdot", f"/samples/{i}", list), f"/samples/{i}/xdot", dim
            )
            label = _get(s, "label", f"/samples/{i}", str, required=False, default=f"sample-{i}")
            try:
                samples.append((label, TangentSample(xs, vs)))
            except ValueError as err:
                raise SceneError(f"/samples/{i}", str(err)) from err
    else:
        _expect(
            bool(entry_samples),
            "/samples",
            "at least one sample is required (catalog scenes may omit them)",
        )
        samples = list(entry_samples)

    opts_obj = _get(obj, "options", "", dict, required=False, default={})
    tol = _get(opts_obj, "tolerances", "/options", dict, required=False, default={})

    def tolval(key, default):
        v = tol.get(key, default)
        _expect(
            isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0,
            f"/options/tolerances/{key}",
            "expected a positive number",
        )
        return float(v)

    convention = _get(
        opts_obj, "signature_convention", "/options", str, required=False, default="+---"
    )
    _expect(
        convention in ("+---", "-+++"),
        "/options/signature_convention",
        "must be '+---' or '-+++'",
    )
    directions = _get(opts_obj, "directions", "/options", int, required=False, default=16)
    _expect(directions >= 2, "/options/directions", "need at least 2 directions")
    seed_val = _get(opts_obj, "seed", "/options", int, required=False, default=0)
    threads = _get(opts_obj, "threads", "/options", int, required=False, default=1)
    _expect(threads >= 1, "/options/threads", "must be >= 1")
    spread = _get(
        opts_obj, "spread", "/options", (int, float), required=False, default=berwald.DEFAULT_SPREAD
    )

    ref = _get(opts_obj, "reference_metric", "/options", list, required=False)
    ref_exprs = None
    ref_src = None
    if ref is not None:
        _expect(len(ref) == dim, "/options/reference_metric", f"expected {dim} rows")
        rows = []
        src_rows = []
        for i, row in enumerate(ref):
            _expect(
                isinstance(row, list) and len(row) == dim,
                f"/options/reference_metric/{i}",
                f"expected {dim} entries",
            )
            rows.append(
                tuple(
                    _parse_expr(s, dim, f"/options/reference_metric/{i}/{j}", (), aliases)
                    for j, s in enumerate(row)
                )
            )
            src_rows.append(tuple(str(s) for s in row))
        ref_exprs = tuple(rows)
        ref_src = tuple(src_rows)

    options = SceneOptions(
        tol_berwald=tolval("berwald", berwald.TOL_BERWALD),
        tol_sym=tolval("sym", berwald.TOL_SYM),
        tol_degenerate=tolval("degenerate", geometry.TOL_DEGENERATE),
        tol_null=tolval("null", geometry.TOL_NULL),
        directions=directions,
        spread=float(spread),
        seed=seed_val,
        signature_convention=convention,
        threads=threads,
        reference_metric=ref_exprs,
        reference_metric_src=ref_src,
    )
    return Scene(
        dim=dim,
        aliases=aliases,
        lagrangian=lag,
        catalog_name=catalog_name,
        samples=tuple(samples),
        options=options,
    )


def load_scene_file(path: str) -> Scene:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as err:
            raise SceneError("", f"invalid JSON: {err}") from err
    return load_scene(obj)


# -- canonical serialization -------------------------------------------------------


def _canon(value):
    """Recursively normalize report values for serialization."""
    if isinstance(value, dict):
        return {str(k): _canon(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_canon(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_canon(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    return value


def render_json(obj, indent: int = 0) -> str:
    """Canonical JSON: floats with 17 significant digits, stable layout."""
    pad = "  " * indent
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return "null"
        return f"{obj:.17g}"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        inner = ",\n".join(
            f"{pad}  {json.dumps(str(k))}: {render_json(v, indent + 1)}"
            for k, v in obj.items()
        )
        return "{\n" + inner + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        inner = ",\n".join(f"{pad}  {render_json(v, indent + 1)}" for v in obj)
        return "[\n" + inner + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def parse_report(text: str) -> dict:
    return json.loads(text)


# -- diagnostics ------------------------------------------------------------------


def _sample_block(scene: Scene, label: str, sample: TangentSample, subcommand: str) -> dict:
    opts = scene.options
    block: dict = {
        "label": label,
        "x": _canon(sample.x),
        "xdot": _canon(sample.xdot),
    }
    verdict = geometry.probe_admissibility(
        scene.lagrangian,
        sample,
        convention=opts.signature_convention,
        tol_degenerate=opts.tol_degenerate,
        tol_null=opts.tol_null,
    )
    block["admissibility"] = {
        "in_A": verdict.in_A,
        "L": verdict.L_value,
        "in_N": verdict.in_N,
        "in_A0": verdict.in_A0,
        "in_T": verdict.in_T,
        "failure_reason": verdict.failure_reason,
    }
    if not verdict.in_A:
        return _canon(block)
    try:
        mv = geometry.metric(scene.lagrangian, sample, opts.tol_degenerate)
        block["metric"] = {"det": mv.det, "signature": list(mv.signature)}
        if subcommand in ("report",):
            ev = geometry._Eval(scene.lagrangian, sample, 4)
            curv = ev.curvature
            block["spray"] = ev.spray_values
            block["nonlinear"] = ev.nonlinear_values
            block["chern_rund"] = ev.gamma_values
            block["cartan_trace"] = ev.cartan_trace
            block["ricci"] = curv.ricci
            block["skew_ricci"] = curv.skew_ricci
            skew_route = geometry.ricci_skew_from_curvature(
                curv.hh_riemann, sample.xdot, ev.cartan_trace
            )
            residuals = {
                "skew_identity": float(
                    np.max(np.abs((curv.ricci - curv.ricci.T) - skew_route))
                ),
                "commutator": geometry.commutator_check(
                    scene.lagrangian,
                    sample,
                    geometry.log_sqrt_det_metric_field(scene.lagrangian),
                ),
            }
            if isinstance(scene.lagrangian, FamilyInstance):
                fit = alphabeta.check_berwald_condition(scene.lagrangian, sample.x)
                residuals["berwald_condition_fit"] = fit.residual
                residuals["fitted_H"] = fit.h
            block["residuals"] = residuals
    except _SAMPLE_ERRORS as err:
        block["error"] = str(err)
    return _canon(block)


def _berwald_blocks(scene: Scene) -> tuple[dict, list]:
    """Per-base-point Berwald verdicts; returns (section, verdict list)."""
    opts = scene.options
    per_point = []
    verdicts = []
    for idx, (label, sample) in enumerate(scene.samples):
        entry = {"label": label, "x": _canon(sample.x)}
        try:
            verdict = berwald.detect_berwald(
                scene.lagrangian,
                sample.x,
                sample.xdot,
                count=opts.directions,
                rng=np.random.default_rng([opts.seed, idx]),
                spread=opts.spread,
                tol_berwald=opts.tol_berwald,
            )
            entry.update(
                {
                    "is_berwald": verdict.is_berwald,
                    "max_gamma_deviation": verdict.max_gamma_deviation,
                    "directions_tested": verdict.directions_tested,
                    "affine_connection": _canon(verdict.affine_connection),
                }
            )
            verdicts.append(verdict)
        except _SAMPLE_ERRORS as err:
            entry["error"] = str(err)
            verdicts.append(None)
        per_point.append(entry)
    ok = [v for v in verdicts if v is not None]
    section = {
        "is_berwald": bool(ok) and all(v.is_berwald for v in ok),
        "max_gamma_deviation": max((v.max_gamma_deviation for v in ok), default=None),
        "per_base_point": per_point,
    }
    return _canon(section), verdicts


def _obstruction_section(scene: Scene) -> tuple[dict, bool]:
    """Obstruction reports per base point; returns (section, nonmetrizable)."""
    opts = scene.options
    per_point = []
    nonmetrizable = False
    condition_all = True
    any_ok = False
    for idx, (label, sample) in enumerate(scene.samples):
        entry = {"label": label, "x": _canon(sample.x)}
        try:
            rep = berwald.obstruction(
                scene.lagrangian,
                sample.x,
                sample.xdot,
                count=opts.directions,
                rng_seed=[opts.seed, idx],
                spread=opts.spread,
                tol_berwald=opts.tol_berwald,
                tol_sym=opts.tol_sym,
            )
        except _SAMPLE_ERRORS as err:
            entry["error"] = str(err)
            per_point.append(entry)
            condition_all = False
            continue
        any_ok = True
        entry.update(
            {
                "ricci": _canon(rep.ricci),
                "skew": _canon(rep.skew),
                "skew_max_abs": rep.skew_max_abs,
                "condition_met": rep.metrizability_necessary_condition_met,
                "phi_constancy_residual": rep.phi_constancy_residual,
            }
        )
        per_point.append(entry)
        if not rep.metrizability_necessary_condition_met:
            nonmetrizable = True
            condition_all = False
    section = {
        "metrizability_necessary_condition_met": any_ok and condition_all,
        "max_skew_abs": max(
            (e["skew_max_abs"] for e in per_point if "skew_max_abs" in e), default=None
        ),
        "per_base_point": per_point,
    }
    return _canon(section), nonmetrizable


def _causal_section(scene: Scene) -> dict:
    per_point = []
    all_viable = True
    for label, sample in scene.samples:
        cc = alphabeta.classify_causal(scene.lagrangian, sample)
        per_point.append(
            {
                "label": label,
                "x": _canon(sample.x),
                "p_case": cc.p_case,
                "det_zeta": cc.det_zeta,
                "zeta_signature": list(cc.zeta_signature),
                "viable": cc.viable,
            }
        )
        all_viable = all_viable and cc.viable
    return _canon({"viable": all_viable, "per_base_point": per_point})


def _proposition_section(scene: Scene) -> tuple[dict, bool]:
    per_point = []
    fires_any = False
    for label, sample in scene.samples:
        cf = alphabeta.closed_form_ricci(scene.lagrangian, sample.x)
        wedge = alphabeta.beta_wedge_dh(scene.lagrangian, sample.x)
        fires = alphabeta.proposition_nonmetrizable(scene.lagrangian, sample.x)
        fires_any = fires_any or fires
        per_point.append(
            {
                "label": label,
                "x": _canon(sample.x),
                "f_scalar": cf.f_scalar,
                "beta_wedge_dH_max": float(np.max(np.abs(wedge))),
                "nonmetrizable": fires,
            }
        )
    return _canon({"fires": fires_any, "per_base_point": per_point}), fires_any


def _nonmetricity_section(scene: Scene) -> dict:
    opts = scene.options
    per_point = []
    for idx, (label, sample) in enumerate(scene.samples):
        entry = {"label": label, "x": _canon(sample.x)}
        try:
            fld = berwald.BerwaldConnectionField(
                scene.lagrangian,
                sample.xdot,
                count=opts.directions,
                rng_seed=opts.seed,
                spread=opts.spread,
            )
            rep = berwald.nonmetricity(fld, opts.reference_metric, sample.x)
            entry.update(
                {"Q_norm": rep.Q_norm, "D": _canon(rep.D), "Q": _canon(rep.Q)}
            )
        except _SAMPLE_ERRORS as err:
            entry["error"] = str(err)
        per_point.append(entry)
    return _canon(
        {
            "reference_metric": [list(r) for r in (scene.options.reference_metric_src or [])],
            "per_base_point": per_point,
        }
    )


def run_scene(scene: Scene, subcommand: str) -> tuple[dict, int]:
    """Execute the requested diagnostics; returns (report, exit code)."""
    if subcommand not in SUBCOMMANDS:
        raise ValueError(f"unknown subcommand {subcommand!r}")
    opts = scene.options
    report: dict = {
        "metadata": {
            "tool": "finslergeo",
            "version": __version__,
            "subcommand": subcommand,
            "seed": opts.seed,
            "directions": opts.directions,
            "spread": opts.spread,
            "signature_convention": opts.signature_convention,
            "tolerances": {
                "berwald": opts.tol_berwald,
                "sym": opts.tol_sym,
                "degenerate": opts.tol_degenerate,
                "null": opts.tol_null,
            },
            "catalog": scene.catalog_name,
            "dim": scene.dim,
        }
    }
    jobs = list(scene.samples)
    if opts.threads > 1:
        with ThreadPoolExecutor(max_workers=opts.threads) as pool:
            blocks = list(
                pool.map(
                    lambda item: _sample_block(scene, item[0], item[1], subcommand),
                    jobs,
                )
            )
    else:
        blocks = [_sample_block(scene, label, s, subcommand) for label, s in jobs]
    report["samples"] = blocks

    is_family = isinstance(scene.lagrangian, FamilyInstance)
    geometry_section: dict = {}
    exit_code = 0
    warnings: list[str] = []

    if subcommand in ("berwald", "obstruction", "nonmetricity", "report"):
        section, _ = _berwald_blocks(scene)
        geometry_section["berwald"] = section

    if subcommand in ("obstruction", "report"):
        section, nonmetrizable = _obstruction_section(scene)
        geometry_section["obstruction"] = section
        if nonmetrizable:
            exit_code = 2
        if is_family:
            prop, fires = _proposition_section(scene)
            geometry_section["family_proposition"] = prop
            if fires:
                exit_code = 2

    if subcommand in ("causal", "report"):
        if is_family:
            geometry_section["causal"] = _causal_section(scene)
            if not geometry_section["causal"]["viable"]:
                warnings.append("causal classification reports a non-viable instance")
        elif subcommand == "causal":
            warnings.append("causal classification applies only to family Lagrangians")

    if subcommand in ("nonmetricity", "report"):
        if opts.reference_metric is not None:
            geometry_section["nonmetricity"] = _nonmetricity_section(scene)
        elif subcommand == "nonmetricity":
            raise SceneError(
                "/options/reference_metric",
                "a reference metric is required for non-metricity diagnostics",
            )

    report["geometry"] = geometry_section
    if warnings:
        report["warnings"] = warnings
    return report, exit_code
