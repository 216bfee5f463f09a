"""Command-line frontend for the synthesis pipeline.

Subcommands: ``model`` (build + structural report), ``synth`` (controller
+ certificate), ``verify`` (re-check a controller file against its
plant), ``analyze`` (eigenvalue dumps + spillover table) and ``simulate``
(trajectories, energies, displacement field, energy audit).

Exit codes: 0 success, 2 validation error, 3 synthesis infeasibility,
4 audit or verification failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import scenarios, serialization
from .discretize import io_rank_report, verify_structure
from .errors import (
    NoAdmissibleAlpha,
    NotAdmissible,
    NoPdSolution,
    SeparationMismatch,
    ToolkitError,
    ValidationError,
)
from .linalg import eigenvalues, is_hurwitz
from .riccati import AreProblem, check_admissible
from .simulate import beam_deformation, lyapunov_audit, simulate, spillover_sweep
from .synthesis import build_controller, choose_rc, close_loop, \
    separation_spectrum, verify_matching, verify_spr
from .riccati import lqr_gain

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3
EXIT_AUDIT = 4


def _load_config(path) -> scenarios.ScenarioConfig:
    if path is None:
        raise ValidationError("--config", "a config file is required")
    return scenarios.ScenarioConfig.from_json(path)


def _out_dir(args, cfg) -> Path:
    out = Path(args.out) if args.out else Path(cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _design_plant(cfg):
    return scenarios.build_plant(cfg.model, order=cfg.design.n_c,
                                 default_order=cfg.design.n_c)


def _synthesize(cfg, plant):
    tols = cfg.tolerances
    K = lqr_gain(plant, cfg.design.q_lqr, cfg.design.r_lqr)
    A_K = plant.A - plant.B @ K
    cross = K.T @ plant.C
    C_K = -(cross + cross.T)
    selection = choose_rc(A_K, C_K, cfg.design.rc_alpha_grid,
                          axis_tol=tols.axis_tol)
    ctrl = build_controller(plant, K, selection.R_c)
    return K, selection, ctrl


def _certificate_dict(cfg, plant, ctrl, selection=None):
    tols = cfg.tolerances
    matching = verify_matching(ctrl, plant, tol=tols.matching_tol)
    cert = verify_spr(ctrl, eps_floor=tols.spr_eps_floor,
                      residual_tol=tols.spr_residual_tol)
    hk = is_hurwitz(plant.A - plant.B @ ctrl.K)
    hl = is_hurwitz(plant.A - ctrl.L @ plant.C)
    cross = ctrl.K.T @ plant.C
    problem = AreProblem(A_K=plant.A - plant.B @ ctrl.K, R_c=ctrl.R_c,
                         C_K=-(cross + cross.T))
    adm = check_admissible(problem, axis_tol=tols.axis_tol)
    data = {
        "epsilon": cert.epsilon,
        "kyp_lyapunov_residual": cert.lyapunov_residual,
        "matching_residuals": {
            "dynamics": matching.dynamics_residual,
            "gain": matching.gain_residual,
            "injection": matching.injection_residual,
        },
        "hurwitz_margin_state_feedback": -hk.max_real_part,
        "hurwitz_margin_observer": -hl.max_real_part,
        "hamiltonian_spectral_gap": adm.spectral_gap,
        "all_passed": bool(matching.passed and cert.passed
                           and hk.is_hurwitz and hl.is_hurwitz),
        "tolerances": cfg.tolerances.as_dict(),
    }
    if selection is not None:
        data["rc_alpha"] = selection.alpha
        data["rc_alpha_rejected"] = [list(item) for item in selection.rejected]
    return data


def cmd_model(args) -> int:
    cfg = _load_config(args.config)
    out = _out_dir(args, cfg)
    plant = _design_plant(cfg)
    report = verify_structure(plant)
    ranks = io_rank_report(plant, rtol=cfg.tolerances.rank_rtol)
    serialization.dump_json(serialization.system_to_dict(plant), out / "system.json")
    for name in ("J", "R", "Q", "B"):
        serialization.write_matrix_csv(getattr(plant, name), out / f"{name}.csv")
    serialization.write_matrix_csv(plant.A, out / "A.csv")
    serialization.write_matrix_csv(plant.C, out / "C.csv")
    report_data = {
        "structure": {k: getattr(report, k) for k in report.__dataclass_fields__},
        "structure_ok": report.all_within(cfg.tolerances.structure_tol),
        "controllable": ranks.controllable,
        "observable": ranks.observable,
        "pbh_margin_controllability": ranks.controllability.margin,
        "pbh_margin_observability": ranks.observability.margin,
        "tolerances": cfg.tolerances.as_dict(),
    }
    spec = scenarios.build_continuous_spec(cfg.model)
    if spec is not None:
        serialization.dump_json(serialization.bcphs_to_dict(spec),
                                out / "continuous_model.json")
    serialization.dump_json(report_data, out / "structure_report.json")
    print(f"model: {plant.n_c} states, {plant.m} channels, h = {plant.h:.6g}")
    print(f"structure ok: {report_data['structure_ok']} "
          f"(tol {cfg.tolerances.structure_tol:g}), "
          f"controllable: {ranks.controllable}, observable: {ranks.observable}")
    print(f"wrote {out / 'system.json'}")
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = _load_config(args.config)
    out = _out_dir(args, cfg)
    plant = _design_plant(cfg)
    K, selection, ctrl = _synthesize(cfg, plant)
    cert = _certificate_dict(cfg, plant, ctrl, selection)
    serialization.dump_json(
        serialization.controller_to_dict(ctrl, certificate=cert),
        out / "controller.json")
    print(f"controller: order {ctrl.order}, {ctrl.m} channels, "
          f"rc alpha = {selection.alpha:g}")
    print(f"epsilon = {cert['epsilon']:.6g}, "
          f"Hamiltonian gap = {cert['hamiltonian_spectral_gap']:.6g}")
    print(f"matching residuals: {cert['matching_residuals']} "
          f"(tol {cfg.tolerances.matching_tol:g})")
    print(f"certificate all_passed: {cert['all_passed']}")
    print(f"wrote {out / 'controller.json'}")
    return EXIT_OK if cert["all_passed"] else EXIT_AUDIT


def _load_controller(args):
    if args.controller is None:
        raise ValidationError("--controller", "a controller file is required")
    data = serialization.load_json(args.controller)
    return serialization.controller_from_dict(data)


def cmd_verify(args) -> int:
    cfg = _load_config(args.config)
    out = _out_dir(args, cfg)
    plant = _design_plant(cfg)
    ctrl, _ = _load_controller(args)
    report = {"structure": None, "certificate": None, "separation_ok": None}
    structure = verify_structure(plant)
    report["structure"] = structure.all_within(cfg.tolerances.structure_tol)
    cert = _certificate_dict(cfg, plant, ctrl)
    report["certificate"] = cert
    try:
        sep = separation_spectrum(ctrl, plant, tol=cfg.tolerances.separation_tol)
        report["separation_ok"] = True
        report["separation_distance"] = sep.max_pairing_distance
    except SeparationMismatch as exc:
        report["separation_ok"] = False
        report["separation_error"] = str(exc)
    passed = bool(report["structure"] and cert["all_passed"]
                  and report["separation_ok"])
    report["all_passed"] = passed
    serialization.dump_json(report, out / "verify_report.json")
    print(f"structure ok: {report['structure']}, "
          f"certificate ok: {cert['all_passed']}, "
          f"separation ok: {report['separation_ok']} "
          f"(tol {cfg.tolerances.separation_tol:g})")
    print(f"wrote {out / 'verify_report.json'}")
    return EXIT_OK if passed else EXIT_AUDIT


def cmd_analyze(args) -> int:
    cfg = _load_config(args.config)
    out = _out_dir(args, cfg)
    plant = _design_plant(cfg)
    ctrl, _ = _load_controller(args)
    if plant.n_c != ctrl.order:
        raise ValidationError("design.n_c",
                              f"controller order {ctrl.order} does not match "
                              f"design plant order {plant.n_c}")
    spec_open = eigenvalues(plant.A)
    spec_k = eigenvalues(plant.A - plant.B @ ctrl.K_eff)
    spec_l = eigenvalues(plant.A - ctrl.B_c @ plant.C)
    serialization.write_eigenvalues_csv(
        [("open_loop", spec_open.eigenvalues),
         ("state_feedback", spec_k.eigenvalues),
         ("observer", spec_l.eigenvalues)],
        out / "eigenvalues.csv")

    flagged = cfg.flagged_eval_orders()
    if flagged:
        print(f"note: eval orders below design order: {flagged}")

    wrote = [out / "eigenvalues.csv"]
    if cfg.analysis.eval_orders:
        if cfg.model.builder is None:
            raise ValidationError("model.builder",
                                  "spillover sweeps need a named builder")

        def make_plant(order):
            return scenarios.build_plant(cfg.model, order=order)

        report = spillover_sweep(make_plant, cfg.design.n_c,
                                 cfg.analysis.eval_orders, design="spr",
                                 q_lqr=cfg.design.q_lqr, r_lqr=cfg.design.r_lqr,
                                 rc_alpha_grid=cfg.design.rc_alpha_grid)
        serialization.write_spillover_csv(report, out / "spillover.csv")
        wrote.append(out / "spillover.csv")
        labeled = []
        for row in report.rows:
            if row.error is None:
                cl = close_loop(scenarios.build_plant(cfg.model, order=row.order), ctrl)
                labeled.append((f"closed_loop_order_{row.order}",
                                eigenvalues(cl.A_cl).eigenvalues))
        serialization.write_eigenvalues_csv(labeled,
                                            out / "closed_loop_eigenvalues.csv")
        wrote.append(out / "closed_loop_eigenvalues.csv")
        for row in report.rows:
            status = "stable" if row.stable else "UNSTABLE"
            if row.error is not None:
                status = f"error: {row.error}"
                print(f"spr design, order {row.order}: {status}")
            else:
                print(f"spr design, order {row.order}: max Re = "
                      f"{row.max_real_part:.6g} ({status})")
        if cfg.analysis.include_naive_baseline:
            naive = spillover_sweep(make_plant, cfg.design.n_c,
                                    cfg.analysis.eval_orders, design="naive_lqg",
                                    q_lqr=cfg.design.q_lqr, r_lqr=cfg.design.r_lqr)
            serialization.write_spillover_csv(naive, out / "spillover_naive.csv")
            wrote.append(out / "spillover_naive.csv")
            for row in naive.rows:
                if row.error is None:
                    print(f"naive baseline, order {row.order}: max Re = "
                          f"{row.max_real_part:.6g} (reported, not asserted)")
    for path in wrote:
        print(f"wrote {path}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    out = _out_dir(args, cfg)
    plant = _design_plant(cfg)
    ctrl, _ = _load_controller(args)
    x0, xhat0, w0 = scenarios.initial_condition(cfg.simulation.initial, plant)
    cl = close_loop(plant, ctrl)
    try:
        result = simulate(cl, x0, xhat0=xhat0, r=cfg.simulation.reference,
                          dt=cfg.simulation.dt, t_end=cfg.simulation.t_end,
                          stride=cfg.output.stride)
    except ToolkitError as exc:
        print(f"integration failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    serialization.write_trajectory_csv(result, out / "trajectory.csv")
    wrote = [out / "trajectory.csv"]
    if plant.builder == "timoshenko":
        field = beam_deformation(result, plant, w0=w0)
        serialization.write_deformation_csv(field, out / "deformation.csv")
        wrote.append(out / "deformation.csv")

    exit_code = EXIT_OK
    if result.zero_reference:
        audit = lyapunov_audit(result, ctrl, plant,
                               tol_factor=cfg.tolerances.audit_tol_factor)
        audit_data = {k: getattr(audit, k) for k in audit.__dataclass_fields__}
        audit_data["passed"] = audit.passed
        audit_data["tolerances"] = cfg.tolerances.as_dict()
        serialization.dump_json(audit_data, out / "audit.json")
        wrote.append(out / "audit.json")
        print(f"audit: max defect {audit.max_defect:.3e} "
              f"(tol {audit.tolerance:.3e}), passed: {audit.passed}")
        if not audit.passed:
            exit_code = EXIT_AUDIT
    else:
        print("audit: skipped (nonzero reference)")
    v0, v1 = result.total_energy[0], result.total_energy[-1]
    ratio = v1 / v0 if v0 > 0 else 0.0
    print(f"energy: V(0) = {v0:.6g}, V(end) = {v1:.6g} (ratio {ratio:.3e})")
    for path in wrote:
        print(f"wrote {path}")
    return exit_code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phspr",
        description="Passive observer-based boundary controller toolkit")
    parser.add_argument("--seed-fixtures", action="store_true",
                        help="write the scalar/beam/wave scenario fixtures "
                             "to --out and exit")
    parser.add_argument("--out", default=None, help="output directory")
    sub = parser.add_subparsers(dest="command")
    for name, fn in (("model", cmd_model), ("synth", cmd_synth),
                     ("verify", cmd_verify), ("analyze", cmd_analyze),
                     ("simulate", cmd_simulate)):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="scenario JSON file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--controller", default=None,
                       help="controller JSON file")
        p.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed_fixtures:
        out = Path(args.out) if args.out else Path("fixtures")
        paths = scenarios.write_fixtures(out)
        for path in paths:
            print(f"wrote {path}")
        return EXIT_OK
    if not getattr(args, "command", None):
        parser.print_help()
        return EXIT_VALIDATION
    try:
        return args.fn(args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NotAdmissible, NoAdmissibleAlpha) as exc:
        print(f"synthesis infeasible: {exc}\nhint: reduce the rc alpha value",
              file=sys.stderr)
        return EXIT_INFEASIBLE
    except NoPdSolution as exc:
        print(f"synthesis infeasible: {exc}\nhint: adjust the LQR weights",
              file=sys.stderr)
        return EXIT_INFEASIBLE
    except ToolkitError as exc:
        print(f"synthesis infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    raise SystemExit(main())
