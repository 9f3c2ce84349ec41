"""Command-line interface.

Subcommands: ``glm`` and ``gc`` map a volume's activation with the two
detectors; ``compare`` runs both and reports overlap and localization;
``connectivity`` measures directed causality between two voxels;
``phantom`` generates synthetic volumes with ground truth; ``gini`` scores a
map CSV's localization.

Exit codes: 0 on success, 2 on a malformed input file, 3 on a bad parameter.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from .core import StimulusTrain, canonical_hrf
from .errors import (
    CausalvoxError,
    FileFormatError,
    InvalidParameterError,
    UndefinedSparsityError,
)
from .figures import save_compare_figure, save_map_figure
from .glm import DetectionResult, GlmConfig, glm_map
from .granger import GrangerConfig, connectivity, default_stim_lags, granger_map
from .phantom import Paradigm, PhantomSpec, beta_for_cnr, generate
from .sparsity import MAGNITUDE_MODES, map_gini
from .volio import (
    quantized,
    read_map_csv,
    read_stimulus,
    read_volume,
    write_map_csv,
    write_slice_pgms,
    write_stimulus,
    write_truth_csv,
    write_volume,
)

EXIT_OK = 0
EXIT_FORMAT = 2
EXIT_PARAMETER = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage problems; this toolkit reserves 2
    # for file-format errors, so usage problems become parameter errors (3)
    def error(self, message):
        raise _UsageError(message)


def _parse_triple(text: str, what: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise InvalidParameterError(f"{what} must be three comma-separated integers")
    try:
        triple = tuple(int(p) for p in parts)
    except ValueError:
        raise InvalidParameterError(f"{what} must be integers, got {text!r}") from None
    return triple


def _ensure_parent(prefix: str) -> None:
    parent = os.path.dirname(prefix)
    if parent:
        os.makedirs(parent, exist_ok=True)


def _load_inputs(volume_path: str, stimulus_path: str):
    grid = read_volume(volume_path)
    samples, tr = read_stimulus(stimulus_path)
    if tr is not None and not math.isclose(tr, grid.tr_seconds, rel_tol=1e-9):
        raise InvalidParameterError(
            f"stimulus tr {tr} disagrees with volume tr {grid.tr_seconds}"
        )
    if samples.size != grid.n_timepoints:
        raise InvalidParameterError(
            f"stimulus has {samples.size} samples, volume has {grid.n_timepoints}"
        )
    return grid, StimulusTrain(samples=samples, tr_seconds=grid.tr_seconds)


def _map_gini_text(results, mode: str = "all-voxels") -> str:
    try:
        return repr(map_gini(results, mode))
    except UndefinedSparsityError:
        return "undefined"


def _emit_map_outputs(prefix: str, results, dims, figures: bool, title: str) -> None:
    _ensure_parent(prefix)
    write_map_csv(prefix + ".csv", results, dims)
    write_slice_pgms(prefix, results, dims)
    if figures:
        save_map_figure(prefix + "_map.png", results, dims, title)


def _granger_config(args, tr_seconds: float) -> GrangerConfig:
    stim_lags = args.stim_lags
    if stim_lags is None:
        stim_lags = default_stim_lags(tr_seconds)
    return GrangerConfig(
        stim_lags=stim_lags,
        auto_lags=args.auto_lags,
        n_bootstrap=args.bootstrap,
        alpha=args.alpha,
        null_scheme=args.null_scheme,
        block_len=args.block_len,
        rng_seed=args.seed,
    )


def _check_jobs(jobs: int) -> int:
    if jobs < 1:
        raise InvalidParameterError(f"--jobs must be >= 1, got {jobs}")
    return jobs


def _cmd_glm(args) -> int:
    grid, stim = _load_inputs(args.volume, args.stimulus)
    cfg = GlmConfig(
        hrf=canonical_hrf(grid.tr_seconds, args.hrf_duration), alpha=args.alpha
    )
    results = glm_map(grid, stim, cfg, jobs=_check_jobs(args.jobs))
    _emit_map_outputs(
        args.out_prefix, results, grid.dims, not args.no_figures, "GLM activation map"
    )
    n_active = sum(r.active for r in results)
    print(
        f"glm: voxels={grid.n_voxels} active={n_active} "
        f"gini={_map_gini_text(results)}"
    )
    return EXIT_OK


def _cmd_gc(args) -> int:
    grid, stim = _load_inputs(args.volume, args.stimulus)
    cfg = _granger_config(args, grid.tr_seconds)
    results = granger_map(grid, stim, cfg, jobs=_check_jobs(args.jobs))
    _emit_map_outputs(
        args.out_prefix,
        results,
        grid.dims,
        not args.no_figures,
        "Causality activation map",
    )
    n_active = sum(r.active for r in results)
    print(
        f"gc: voxels={grid.n_voxels} active={n_active} "
        f"gini={_map_gini_text(results)}"
    )
    return EXIT_OK


def _jaccard(set_a: set, set_b: set) -> float:
    union = set_a | set_b
    if not union:
        # two empty activation sets overlap perfectly
        return 1.0
    return len(set_a & set_b) / len(union)


def _cmd_compare(args) -> int:
    grid, stim = _load_inputs(args.volume, args.stimulus)
    jobs = _check_jobs(args.jobs)
    glm_cfg = GlmConfig(
        hrf=canonical_hrf(grid.tr_seconds, args.hrf_duration), alpha=args.alpha
    )
    gc_cfg = _granger_config(args, grid.tr_seconds)
    glm_results = glm_map(grid, stim, glm_cfg, jobs=jobs)
    gc_results = granger_map(grid, stim, gc_cfg, jobs=jobs)

    _ensure_parent(args.out_prefix)
    write_map_csv(args.out_prefix + "_glm.csv", glm_results, grid.dims)
    write_map_csv(args.out_prefix + "_gc.csv", gc_results, grid.dims)
    scatter_path = args.out_prefix + "_scatter.csv"
    with open(scatter_path, "w", newline="\n") as fh:
        fh.write(
            "x,y,z,glm_statistic,glm_p_value,glm_active,"
            "gc_statistic,gc_p_value,gc_active\n"
        )
        for index, (a, b) in enumerate(zip(glm_results, gc_results)):
            x, y, z = grid.coords(index)
            fh.write(
                f"{x},{y},{z},{a.statistic!r},{a.p_value!r},{int(a.active)},"
                f"{b.statistic!r},{b.p_value!r},{int(b.active)}\n"
            )

    glm_set = {i for i, r in enumerate(glm_results) if r.active}
    gc_set = {i for i, r in enumerate(gc_results) if r.active}
    lines = [
        f"voxels={grid.n_voxels}",
        f"glm_active={len(glm_set)}",
        f"gc_active={len(gc_set)}",
        f"jaccard={_jaccard(glm_set, gc_set)!r}",
        f"glm_gini={_map_gini_text(glm_results)}",
        f"gc_gini={_map_gini_text(gc_results)}",
    ]
    with open(args.out_prefix + "_report.txt", "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    if not args.no_figures:
        save_compare_figure(
            args.out_prefix + "_compare.png",
            glm_results,
            gc_results,
            "GLM vs causality detection",
        )
    print("\n".join(lines))
    return EXIT_OK


def _cmd_connectivity(args) -> int:
    grid = read_volume(args.volume)
    source = _parse_triple(args.source, "--source")
    target = _parse_triple(args.target, "--target")
    cfg = _granger_config(args, grid.tr_seconds)
    source_index = grid.flat_index(*source)
    target_index = grid.flat_index(*target)
    score = connectivity(grid, source_index, target_index, cfg)
    record = {
        "source": list(source),
        "target": list(target),
        "strength": score.strength,
        "rss_full": score.rss_full,
        "rss_null": score.rss_null,
        "p_value": score.p_value,
        "significant": score.significant,
        "statistic": score.strength if score.significant else 0.0,
        "diagnostics": sorted(score.diagnostics),
        "null_distribution": (
            [] if score.null_distribution is None else list(score.null_distribution)
        ),
    }
    text = json.dumps(record, indent=2)
    if args.out:
        _ensure_parent(args.out)
        with open(args.out, "w", newline="\n") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_OK


def _cmd_phantom(args) -> int:
    dims = _parse_triple(args.dims, "--dims")
    paradigm = Paradigm(
        initial_rest_s=args.initial_rest,
        task_s=args.task,
        rest_s=args.rest,
        repetitions=args.repetitions,
        runs=args.runs,
    )
    base = PhantomSpec(
        dims=dims,
        tr_seconds=args.tr,
        paradigm=paradigm,
        n_volumes_per_run=args.volumes_per_run,
        white_sd=args.white_sd,
        ar1_coeff=args.ar1,
        offset=args.offset,
        slope=args.slope,
        rng_seed=args.seed,
    )
    n_vox = base.n_voxels
    mask = np.zeros(n_vox, dtype=bool)
    if args.active:
        for spec_text in args.active:
            x, y, z = _parse_triple(spec_text, "--active")
            nx, ny, nz = dims
            if not (0 <= x < nx and 0 <= y < ny and 0 <= z < nz):
                raise InvalidParameterError(f"--active voxel ({x},{y},{z}) outside {dims}")
            mask[(x * ny + y) * nz + z] = True
    elif args.n_active > 0:
        if args.n_active > n_vox:
            raise InvalidParameterError(
                f"--n-active {args.n_active} exceeds {n_vox} voxels"
            )
        # placement stream lives outside the per-voxel noise namespace
        placement = np.random.default_rng([args.seed, 2**63])
        mask[placement.choice(n_vox, size=args.n_active, replace=False)] = True

    if args.beta is not None:
        beta = args.beta
    else:
        beta = beta_for_cnr(base, args.cnr)

    spec = PhantomSpec(
        dims=dims,
        tr_seconds=args.tr,
        paradigm=paradigm,
        n_volumes_per_run=args.volumes_per_run,
        active_mask=mask,
        beta_true=beta,
        white_sd=args.white_sd,
        ar1_coeff=args.ar1,
        offset=args.offset,
        slope=args.slope,
        rng_seed=args.seed,
    )
    data = generate(spec)
    grid = quantized(data.grid)

    _ensure_parent(args.out_prefix)
    write_volume(args.out_prefix + ".bvol", grid)
    write_stimulus(args.out_prefix + "_stim.txt", data.stim)
    write_truth_csv(args.out_prefix + "_truth.csv", data.truth, dims)
    print(
        f"phantom: voxels={n_vox} timepoints={grid.n_timepoints} "
        f"active={int(mask.sum())} beta={beta!r}"
    )
    return EXIT_OK


def _cmd_gini(args) -> int:
    rows = read_map_csv(args.map_csv)
    results = [
        DetectionResult(
            statistic=row["statistic"], p_value=row["p_value"], active=row["active"]
        )
        for row in rows
    ]
    print(repr(map_gini(results, args.mode)))
    return EXIT_OK


def _add_gc_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--stim-lags",
        type=int,
        default=None,
        help="driver lag count (default: hemodynamic span / tr)",
    )
    parser.add_argument("--auto-lags", type=int, default=1, help="signal auto-lag count")
    parser.add_argument(
        "--bootstrap", type=int, default=100, help="surrogate count for the null"
    )
    parser.add_argument("--seed", type=int, default=0, help="RNG seed")
    parser.add_argument(
        "--null-scheme",
        choices=["circular-shift", "block-bootstrap"],
        default="circular-shift",
        help="driver resampling scheme",
    )
    parser.add_argument(
        "--block-len", type=int, default=10, help="block length for block-bootstrap"
    )


def _add_map_output_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out-prefix", required=True, help="output path prefix")
    parser.add_argument("--jobs", type=int, default=1, help="worker thread count")
    parser.add_argument(
        "--no-figures", action="store_true", help="skip figure rendering"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="causalvox",
        description=(
            "Detect activated voxels in BOLD-like volumes by GLM or by "
            "Granger-style causality, measure pairwise voxel connectivity "
            "with the same engine, and score map localization with the Gini "
            "index."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_glm = sub.add_parser("glm", help="GLM activation map")
    p_glm.add_argument("volume")
    p_glm.add_argument("stimulus")
    p_glm.add_argument("--alpha", type=float, default=0.05, help="significance level")
    p_glm.add_argument(
        "--hrf-duration", type=float, default=16.0, help="kernel support in seconds"
    )
    _add_map_output_flags(p_glm)
    p_glm.set_defaults(func=_cmd_glm)

    p_gc = sub.add_parser("gc", help="causality activation map")
    p_gc.add_argument("volume")
    p_gc.add_argument("stimulus")
    p_gc.add_argument("--alpha", type=float, default=0.05, help="significance level")
    _add_gc_flags(p_gc)
    _add_map_output_flags(p_gc)
    p_gc.set_defaults(func=_cmd_gc)

    p_cmp = sub.add_parser("compare", help="run both detectors and report overlap")
    p_cmp.add_argument("volume")
    p_cmp.add_argument("stimulus")
    p_cmp.add_argument("--alpha", type=float, default=0.05, help="significance level")
    p_cmp.add_argument(
        "--hrf-duration", type=float, default=16.0, help="kernel support in seconds"
    )
    _add_gc_flags(p_cmp)
    _add_map_output_flags(p_cmp)
    p_cmp.set_defaults(func=_cmd_compare)

    p_conn = sub.add_parser("connectivity", help="voxel-to-voxel causality")
    p_conn.add_argument("volume")
    p_conn.add_argument("--source", required=True, help="source voxel x,y,z")
    p_conn.add_argument("--target", required=True, help="target voxel x,y,z")
    p_conn.add_argument("--alpha", type=float, default=0.05, help="significance level")
    _add_gc_flags(p_conn)
    p_conn.add_argument("--out", default=None, help="also write the record here")
    p_conn.set_defaults(func=_cmd_connectivity)

    p_ph = sub.add_parser("phantom", help="generate a synthetic volume")
    p_ph.add_argument("--dims", default="8,8,1", help="grid size nx,ny,nz")
    p_ph.add_argument("--tr", type=float, default=2.0, help="sampling interval, s")
    p_ph.add_argument("--initial-rest", type=float, default=30.0, help="seconds")
    p_ph.add_argument("--task", type=float, default=12.0, help="task block, s")
    p_ph.add_argument("--rest", type=float, default=30.0, help="rest block, s")
    p_ph.add_argument("--repetitions", type=int, default=5, help="blocks per run")
    p_ph.add_argument("--runs", type=int, default=2)
    p_ph.add_argument("--volumes-per-run", type=int, default=181)
    p_ph.add_argument(
        "--active",
        action="append",
        default=None,
        metavar="X,Y,Z",
        help="active voxel (repeatable; overrides --n-active)",
    )
    p_ph.add_argument(
        "--n-active", type=int, default=4, help="randomly placed active voxels"
    )
    p_ph.add_argument(
        "--cnr", type=float, default=1.0, help="contrast-to-noise ratio of active voxels"
    )
    p_ph.add_argument(
        "--beta", type=float, default=None, help="activation coefficient (overrides --cnr)"
    )
    p_ph.add_argument("--white-sd", type=float, default=1.0, help="innovation sd")
    p_ph.add_argument("--ar1", type=float, default=0.4, help="noise AR(1) coefficient")
    p_ph.add_argument("--offset", type=float, default=100.0, help="baseline intensity")
    p_ph.add_argument("--slope", type=float, default=0.0, help="trend per sample")
    p_ph.add_argument("--seed", type=int, default=0, help="RNG seed")
    p_ph.add_argument("--out-prefix", required=True, help="output path prefix")
    p_ph.set_defaults(func=_cmd_phantom)

    p_gini = sub.add_parser("gini", help="Gini index of a map CSV")
    p_gini.add_argument("map_csv")
    p_gini.add_argument("--mode", choices=list(MAGNITUDE_MODES), default="all-voxels")
    p_gini.set_defaults(func=_cmd_gini)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"causalvox: error: {exc}", file=sys.stderr)
        return EXIT_PARAMETER
    try:
        return args.func(args)
    except FileFormatError as exc:
        print(f"causalvox: format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except FileNotFoundError as exc:
        print(f"causalvox: format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (InvalidParameterError, UndefinedSparsityError) as exc:
        print(f"causalvox: parameter error: {exc}", file=sys.stderr)
        return EXIT_PARAMETER
    except CausalvoxError as exc:
        print(f"causalvox: error: {exc}", file=sys.stderr)
        return EXIT_PARAMETER


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
