"""Command-line entry point.

Subcommands cover the three simulators, every closed-form bound, the
codeword and hash primitives, and config/table validation.  Every JSON
run document echoes the fully resolved configuration next to its
results, so a run can be reproduced from its own output.  Exit codes:
0 success, 2 validation/usage error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import authcodes, bounds, keyexchange, msgauth, qpv
from .errors import PvkexError, ValidationError

OUTPUT_DIR_ENV = "PVKEX_OUTPUT_DIR"
STUB_TABLE = os.path.join(os.path.dirname(__file__), "data",
                          "stub_delta_tilde.json")


def _strict_dataclass(cls, data: dict, label: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ValidationError(f"unknown {label} keys: {unknown}")
    return cls(**data)


def _load_config_file(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValidationError("config file must hold a JSON object")
    return doc


def _resolve_out(path: str | None) -> str | None:
    if path is None:
        return None
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not os.path.isabs(path):
        return os.path.join(base, path)
    return path


def _emit(text: str, out: str | None) -> None:
    target = _resolve_out(out)
    if target:
        with open(target, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_doc(doc: dict, args) -> None:
    _emit(json.dumps(doc, indent=1, sort_keys=True) + "\n",
          getattr(args, "out", None))


def _csv_text(header: list[str], rows: list, config: dict) -> str:
    buf = io.StringIO()
    for key in sorted(config):
        buf.write(f"# {key}={config[key]}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _merge_flags(base: dict, args, mapping: dict[str, str]) -> dict:
    for flag, field in mapping.items():
        value = getattr(args, flag)
        if value is not None:
            base[field] = value
    return base


# ---------------------------------------------------------------- simulate

QPV_FLAG_FIELDS = {
    "n_bits": "nBits", "rounds": "rounds", "eta": "eta",
    "error_threshold": "errorThreshold",
    "deviation_threshold": "deviationThreshold", "num_bases": "numBases",
    "t_delta": "tDelta", "delta_t": "deltaT", "function_seed": "functionSeed",
    "quantum_speed_fraction": "quantumSpeedFraction",
    "verifier_separation": "verifierSeparation",
}


def _qpv_config_from_args(args) -> qpv.QpvConfig:
    data = _load_config_file(args.config) if args.config else {}
    _merge_flags(data, args, QPV_FLAG_FIELDS)
    return _strict_dataclass(qpv.QpvConfig, data, "qpv config")


def _strategy_from_args(args):
    name = args.strategy
    if name == "honest":
        return qpv.Honest()
    if name == "absent":
        return qpv.Absent()
    if name == "abstract-pass":
        return qpv.AbstractPass(args.eps_qpv)
    if name == "basis-guess":
        return qpv.BasisGuess()
    if name == "fixed-basis":
        return qpv.FixedBasis(args.angle)
    raise ValidationError(f"unknown strategy {name!r}")


def cmd_simulate_qpv(args) -> int:
    config = _qpv_config_from_args(args)
    strategy = _strategy_from_args(args)
    resolved = dataclasses.asdict(config)
    resolved.update({"strategy": args.strategy, "seed": args.seed,
                     "multibasis": args.multibasis,
                     "spacetime": args.spacetime})
    if args.sweep_eta:
        start, stop, count = _parse_range(args.sweep_eta)
        seeds = np.random.SeedSequence(args.seed).generate_state(
            count, dtype=np.uint64)
        rows = []
        for i, eta in enumerate(np.linspace(start, stop, count)):
            cfg = dataclasses.replace(config, eta=float(eta))
            runner = (qpv.run_qpv_multibasis if args.multibasis
                      else qpv.run_qpv_single)
            summary = runner(cfg, strategy, seed=int(seeds[i])).summary()
            rows.append([f"{eta:.6g}", summary["rounds"],
                         summary["detections"], summary["errors"],
                         summary["transmission"],
                         summary["conditionalError"], summary["verdict"]])
        _emit(_csv_text(["eta", "rounds", "detections", "errors",
                         "transmission", "conditional_error", "verdict"],
                        rows, resolved), args.out)
        return 0
    if args.spacetime:
        result, sim = qpv.run_qpv_spacetime(config, strategy, seed=args.seed)
        if args.trace:
            with open(_resolve_out(args.trace), "w", encoding="utf-8") as fh:
                fh.write(sim.trace_jsonl())
    else:
        runner = (qpv.run_qpv_multibasis if args.multibasis
                  else qpv.run_qpv_single)
        result = runner(config, strategy, seed=args.seed)
    _emit_doc({"command": "simulate qpv", "config": resolved,
               "results": result.summary()}, args)
    return 0


def _msg_auth_config_from_args(args) -> msgauth.MsgAuthConfig:
    hash_params = authcodes.hash_family_params(args.message_bits,
                                               args.tag_bits)
    codec = authcodes.codec_params(hash_params.keyBits)
    qpv_data = (_load_config_file(args.qpv_config) if args.qpv_config
                else {"rounds": 64})
    qpv_cfg = _strict_dataclass(qpv.QpvConfig, qpv_data, "qpv config")
    return msgauth.MsgAuthConfig(hashParams=hash_params, codecParams=codec,
                                 qpvConfig=qpv_cfg, deltaT=args.delta_t,
                                 tStart=args.t_start, runMode=args.run_mode,
                                 epsRobPerRun=args.eps_rob_per_run)


def _indices(text: str | None) -> tuple[int, ...]:
    if not text:
        return ()
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError as exc:
        raise ValidationError(f"bad index list {text!r}") from exc


def _msg_adversary_from_args(args):
    kind = args.adversary
    if kind == "none":
        return msgauth.NoTamper()
    if kind == "flip-one-to-zero":
        return msgauth.FlipOneToZero(indices=_indices(args.indices))
    if kind == "flip-zero-to-one":
        return msgauth.FlipZeroToOne(indices=_indices(args.indices),
                                     perRunPassProb=args.per_run_pass_prob)
    if kind == "desync":
        return msgauth.Desync(shift=args.shift,
                              perRunPassProb=args.per_run_pass_prob)
    if kind == "delay-msg-tag":
        if args.substitute_message is None or args.substitute_tag is None:
            raise ValidationError(
                "delay-msg-tag needs --substitute-message and "
                "--substitute-tag")
        return msgauth.DelayMsgTag(substituteMessage=args.substitute_message,
                                   substituteTag=args.substitute_tag)
    raise ValidationError(f"unknown adversary {kind!r}")


def cmd_simulate_msgauth(args) -> int:
    config = _msg_auth_config_from_args(args)
    adversary = _msg_adversary_from_args(args)
    message = args.message if args.message is not None else "10" * max(
        1, config.hashParams.messageBits // 4)
    resolved = {
        "tagBits": args.tag_bits, "messageBits": args.message_bits,
        "keyBits": config.hashParams.keyBits,
        "codeLength": config.codecParams.codeLength,
        "deltaT": config.deltaT, "tStart": config.tStart,
        "runMode": config.runMode, "epsRobPerRun": config.epsRobPerRun,
        "adversary": args.adversary, "message": message,
        "trials": args.trials, "seed": args.seed,
    }
    agg = msgauth.run_msg_auth_trials(config, message, adversary,
                                      trials=args.trials, seed=args.seed)
    results = {"aggregate": agg.export_dict()}
    if args.trials == 1:
        out = msgauth.send_authenticated(
            config, message, adversary,
            seed=int(np.random.SeedSequence(args.seed).generate_state(
                1, dtype=np.uint64)[0]))
        results["outcome"] = out.export_dict()
    _emit_doc({"command": "simulate msgauth", "config": resolved,
               "results": results}, args)
    return 0


QKD_FLAG_FIELDS = {
    "signal_count": "signalCount", "channel_qber": "channelQber",
    "pe_sample_fraction": "peSampleFraction", "pe_threshold": "peThreshold",
    "ec_passes": "ecPasses", "pa_output_bits": "paOutputBits",
    "eps_qkd_label": "epsQkdLabel",
}


def _qkd_config_from_args(args) -> keyexchange.QkdConfig:
    data = _load_config_file(args.config) if args.config else {}
    _merge_flags(data, args, QKD_FLAG_FIELDS)
    return _strict_dataclass(keyexchange.QkdConfig, data, "qkd config")


def _channel_adversary_from_args(args):
    kind = args.adversary
    if kind == "none":
        return keyexchange.CleanChannel()
    if kind == "tamper-bob-messages":
        return keyexchange.TamperBobMessages(
            flipIndices=_indices(args.flip_indices) or (-1,))
    if kind == "tamper-tag":
        return keyexchange.TamperTag(
            flipIndices=_indices(args.flip_indices) or (0,))
    if kind == "block-final-qpv":
        return keyexchange.BlockFinalQpv()
    if kind == "impersonate":
        return keyexchange.ImpersonateAtWrongPosition(epsQpv=args.eps_qpv)
    raise ValidationError(f"unknown adversary {kind!r}")


def _keyexchange_worker(payload: tuple) -> dict:
    (protocol, qkd_data, adversary_kind, flip, eps_qpv, tag_bits,
     message_bits, run_mode, eps_rob, delta_t, qpv_rounds, eps_qpv_force,
     seeds) = payload
    qkd_cfg = keyexchange.QkdConfig(**qkd_data)
    qpv_cfg = qpv.QpvConfig(rounds=qpv_rounds)
    if adversary_kind == "none":
        adversary = keyexchange.CleanChannel()
    elif adversary_kind == "tamper-bob-messages":
        adversary = keyexchange.TamperBobMessages(flipIndices=flip)
    elif adversary_kind == "tamper-tag":
        adversary = keyexchange.TamperTag(flipIndices=flip)
    elif adversary_kind == "block-final-qpv":
        adversary = keyexchange.BlockFinalQpv()
    else:
        adversary = keyexchange.ImpersonateAtWrongPosition(epsQpv=eps_qpv)
    hash_params = authcodes.hash_family_params(message_bits, tag_bits)
    if protocol == 1:
        def runner(seed: int):
            return keyexchange.run_protocol1(
                qkd_cfg, qpv_cfg, hash_params, adversary, seed=seed,
                eps_qpv_force=eps_qpv_force,
                abstract_qpv=run_mode == "abstract", eps_rob_qpv=eps_rob)
    else:
        codec = authcodes.codec_params(hash_params.keyBits)
        auth_cfg = msgauth.MsgAuthConfig(
            hashParams=hash_params, codecParams=codec, qpvConfig=qpv_cfg,
            deltaT=delta_t, runMode=run_mode, epsRobPerRun=eps_rob)

        def runner(seed: int):
            return keyexchange.run_protocol3(qkd_cfg, auth_cfg, qpv_cfg,
                                             adversary, seed=seed)
    agg = keyexchange.ExchangeAggregate(trials=len(seeds))
    for seed in seeds:
        agg.add(runner(int(seed)))
    return agg.counts


def cmd_simulate_keyexchange(args) -> int:
    qkd_cfg = _qkd_config_from_args(args)
    qkd_cfg.validate(statistics=args.trials > 1 and not args.small_signals)
    _channel_adversary_from_args(args)  # fail fast on bad combinations
    resolved = dataclasses.asdict(qkd_cfg)
    resolved.update({"protocol": args.protocol, "adversary": args.adversary,
                     "trials": args.trials, "seed": args.seed,
                     "tagBits": args.tag_bits,
                     "messageBits": args.message_bits,
                     "runMode": args.run_mode,
                     "epsRobQpv": args.eps_rob_qpv,
                     "qpvRounds": args.qpv_rounds,
                     "epsQpvForce": args.eps_qpv_force,
                     "parallel": args.parallel})
    seeds = np.random.SeedSequence(args.seed).generate_state(
        args.trials, dtype=np.uint64)
    flip = _indices(args.flip_indices) or ((-1,) if "tamper" in args.adversary
                                           else (0,))
    payload_base = (args.protocol, dataclasses.asdict(qkd_cfg),
                    args.adversary, flip, args.eps_qpv, args.tag_bits,
                    args.message_bits, args.run_mode, args.eps_rob_qpv,
                    args.delta_t, args.qpv_rounds, args.eps_qpv_force)
    if args.parallel > 1:
        chunks = np.array_split(seeds, args.parallel)
        payloads = [payload_base + (chunk.tolist(),) for chunk in chunks
                    if len(chunk)]
        with ProcessPoolExecutor(max_workers=args.parallel) as pool:
            partials = list(pool.map(_keyexchange_worker, payloads))
        counts: dict[str, int] = {}
        for part in partials:
            for name, value in part.items():
                counts[name] = counts.get(name, 0) + value
    else:
        counts = _keyexchange_worker(payload_base + (seeds.tolist(),))
    rows = [(name, cnt, cnt / args.trials)
            for name, cnt in sorted(counts.items())]
    if args.format == "csv":
        _emit(_csv_text(["event", "count", "rate"], rows, resolved),
              args.out)
        return 0
    _emit_doc({"command": "simulate keyexchange", "config": resolved,
               "results": {"trials": args.trials,
                           "counts": dict(sorted(counts.items())),
                           "rates": {name: cnt / args.trials
                                     for name, cnt, _ in rows}}}, args)
    return 0


# ------------------------------------------------------------------ bounds

def _bound_doc(args, params: dict, results: dict, plain_value) -> int:
    if args.plain:
        _emit(f"{plain_value}\n", args.out)
        return 0
    _emit_doc({"command": f"bounds {args.bounds_command}", "config": params,
               "results": results}, args)
    return 0


def cmd_bounds_one_way_auth(args) -> int:
    params = {"epsQkd": args.eps_qkd, "lT": args.l_t,
              "epsQpv": args.eps_qpv, "variant": args.variant}
    both = {v: dataclasses.asdict(bounds.one_way_auth_security(
        args.eps_qkd, args.l_t, args.eps_qpv, v))
        for v in ("reciprocal", "exponential")}
    value = both[args.variant]["value"]
    return _bound_doc(args, params, {"value": value, "variants": both},
                      value)


def cmd_bounds_msg_auth(args) -> int:
    params = {"lK": args.l_k, "epsQpv": args.eps_qpv, "delta": args.delta,
              "epsRob": args.eps_rob}
    security = bounds.msg_auth_security(args.l_k, args.eps_qpv, args.delta)
    robustness = bounds.msg_auth_robustness(args.l_k, args.eps_rob)
    return _bound_doc(args, params,
                      {"security": dataclasses.asdict(security),
                       "robustness": dataclasses.asdict(robustness)},
                      security.value)


def cmd_bounds_credential(args) -> int:
    params = bounds.SecurityParams(
        epsQkd=args.eps_qkd, epsQpv=args.eps_qpv,
        epsRobQkd=args.eps_rob_qkd, epsRobQpv=args.eps_rob_qpv,
        deltaHash=args.delta_hash, lT=args.l_t, lK=args.l_k)
    security = bounds.credential_security(params)
    robustness = bounds.credential_robustness(params)
    return _bound_doc(args, dataclasses.asdict(params),
                      {"security": dataclasses.asdict(security),
                       "robustness": dataclasses.asdict(robustness)},
                      security.value)


def cmd_bounds_nets(args) -> int:
    sizes = bounds.net_sizes(args.q, args.delta)
    return _bound_doc(args, {"q": args.q, "delta": args.delta},
                      dataclasses.asdict(sizes), sizes.log2StateNet)


def cmd_bounds_rounding(args) -> int:
    k = bounds.classical_rounding_size(args.q, args.delta_tilde)
    return _bound_doc(args, {"q": args.q, "deltaTilde": args.delta_tilde},
                      {"size": k}, k)


def cmd_bounds_rounding_failure(args) -> int:
    nu = bounds.rounding_failure_fraction(args.q0, args.delta_tilde,
                                          args.alpha_frac)
    return _bound_doc(args, {"q0": args.q0, "deltaTilde": args.delta_tilde,
                             "alphaFrac": args.alpha_frac},
                      {"failureFraction": nu}, nu)


def cmd_bounds_partition_lb(args) -> int:
    params = {"etaR": args.eta_r, "etaThres": args.eta_thres,
              "epsThres": args.eps_thres, "eta": args.eta, "nu": args.nu,
              "gridStep": args.grid_step}
    closed = bounds.partition_error_lower_bound(
        args.eta_r, args.eta_thres, args.eps_thres, args.eta, args.nu)
    oracle = bounds.partition_error_oracle(
        args.eta_r, args.eta_thres, args.eps_thres, args.eta, args.nu,
        grid_step=args.grid_step)
    return _bound_doc(args, params,
                      {"closedForm": closed, "oracle": oracle}, closed)


def cmd_bounds_error_lb(args) -> int:
    value = bounds.conditioned_error_value(args.eta, args.eta_thres,
                                           args.eps_thres, args.nu,
                                           alpha=args.alpha)
    params = {"eta": args.eta, "etaThres": args.eta_thres,
              "epsThres": args.eps_thres, "nu": args.nu,
              "alpha": args.alpha}
    return _bound_doc(args, params, {"value": value}, value)


def _parse_range(text: str) -> tuple[float, float, int]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ValidationError("range must look like start:stop:count")
    try:
        return float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise ValidationError(f"bad range {text!r}") from exc


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",")]
    except ValueError as exc:
        raise ValidationError(f"bad number list {text!r}") from exc


def cmd_bounds_threshold_curves(args) -> int:
    table = bounds.DeltaTildeTable.from_json(args.table)
    if args.eta_range:
        start, stop, count = _parse_range(args.eta_range)
        etas = np.linspace(start, stop, count).tolist()
    else:
        etas = _parse_floats(args.eta_list)
    q0s = _parse_floats(args.q0_list)
    rows = bounds.threshold_curves(etas, q0s, args.alpha_frac, table)
    params = {"table": args.table, "q0List": q0s, "etaValues": etas,
              "alphaFrac": args.alpha_frac}
    if args.format == "json":
        _emit_doc({"command": "bounds threshold-curves", "config": params,
                   "results": {"rows": rows}}, args)
        return 0
    csv_rows = [[r["q0"], f"{r['eta']:.6g}", r["eps_lb"], r["eta_thres"],
                 r["eps_thres"], int(r["infeasible"])] for r in rows]
    _emit(_csv_text(["q0", "eta", "eps_lb", "eta_thres", "eps_thres",
                     "infeasible"], csv_rows, params), args.out)
    return 0


def cmd_bounds_manifest(args) -> int:
    _emit_doc({"command": "bounds manifest", "config": {},
               "results": {"bounds": bounds.manifest()}}, args)
    return 0


# ------------------------------------------------------- codec / hash

def _hex_to_bits(text: str, bit_len: int, label: str) -> str:
    try:
        value = int(text, 16)
    except ValueError as exc:
        raise ValidationError(f"{label} is not hex") from exc
    full = len(text) * 4
    if full < bit_len:
        raise ValidationError(f"{label} shorter than {bit_len} bits")
    bits = bin(value)[2:].zfill(full)
    if any(ch == "1" for ch in bits[bit_len:]):
        raise ValidationError(f"{label} has set bits past position {bit_len}")
    return bits[:bit_len]


def cmd_codec(args) -> int:
    params = authcodes.codec_params(args.lk)
    if args.codec_command == "enc":
        key = (_hex_to_bits(args.key, args.lk, "key") if args.hex
               else args.key)
        _emit(authcodes.encode(params, key) + "\n", args.out)
        return 0
    word = (_hex_to_bits(args.word, params.codeLength, "word") if args.hex
            else args.word)
    _emit(authcodes.decode(params, word) + "\n", args.out)
    return 0


def cmd_hash_tag(args) -> int:
    params = authcodes.hash_family_params(args.n, args.l_t)
    key = (_hex_to_bits(args.key, params.keyBits, "key") if args.hex
           else args.key)
    message = args.message
    if args.hex:
        message = _hex_to_bits(args.message, len(args.message) * 4,
                               "message")
    _emit(authcodes.hash_tag(params, key, message) + "\n", args.out)
    return 0


# ---------------------------------------------------------------- validate

def cmd_validate(args) -> int:
    kind = args.kind
    if kind == "delta-table":
        table = bounds.DeltaTildeTable.from_json(args.path)
        detail = {"entries": int(table.values.size),
                  "epsRange": [float(table.epsValues[0]),
                               float(table.epsValues[-1])],
                  "etaRange": [float(table.etaValues[0]),
                               float(table.etaValues[-1])]}
    elif kind == "qpv-config":
        cfg = _strict_dataclass(qpv.QpvConfig, _load_config_file(args.path),
                                "qpv config")
        cfg.validate()
        detail = dataclasses.asdict(cfg)
    elif kind == "qkd-config":
        cfg = _strict_dataclass(keyexchange.QkdConfig,
                                _load_config_file(args.path), "qkd config")
        cfg.validate()
        detail = dataclasses.asdict(cfg)
    else:
        raise ValidationError(f"unknown kind {kind!r}")
    _emit_doc({"command": "validate", "config": {"kind": kind,
                                                 "path": args.path},
               "results": {"valid": True, "detail": detail}}, args)
    return 0


# ------------------------------------------------------------------ parser

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", help="output path; relative paths land in "
                        f"${OUTPUT_DIR_ENV} when set")
    parser.add_argument("--format", choices=("json", "csv"), default="json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pvkex",
        description="simulators and bound evaluators for key exchange "
                    "authenticated by position verification")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a simulator")
    sim_sub = sim.add_subparsers(dest="simulate_command", required=True)

    p = sim_sub.add_parser("qpv", help="position-verification rounds")
    _add_common(p)
    p.add_argument("--config", help="JSON file with config fields")
    p.add_argument("--strategy", default="honest",
                   choices=("honest", "absent", "abstract-pass",
                            "basis-guess", "fixed-basis"))
    p.add_argument("--eps-qpv", type=float, default=0.0,
                   help="forced pass probability for abstract-pass")
    p.add_argument("--angle", type=float, default=float(np.pi / 4),
                   help="measurement angle for fixed-basis")
    p.add_argument("--multibasis", action="store_true")
    p.add_argument("--spacetime", action="store_true",
                   help="run through the event queue with timing checks")
    p.add_argument("--trace", help="write signal trace JSONL here "
                                   "(spacetime mode)")
    p.add_argument("--sweep-eta", help="start:stop:count transmission sweep"
                                       " emitting CSV")
    for flag, _ in QPV_FLAG_FIELDS.items():
        kind = int if flag in ("n_bits", "rounds", "num_bases",
                               "function_seed") else float
        p.add_argument("--" + flag.replace("_", "-"), type=kind,
                       default=None)
    p.set_defaults(func=cmd_simulate_qpv)

    p = sim_sub.add_parser("msgauth", help="authenticated message transfer")
    _add_common(p)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--adversary", default="none",
                   choices=("none", "flip-one-to-zero", "flip-zero-to-one",
                            "desync", "delay-msg-tag"))
    p.add_argument("--indices", help="comma-separated 1-based run indices")
    p.add_argument("--per-run-pass-prob", type=float, default=0.0)
    p.add_argument("--shift", type=int, default=1)
    p.add_argument("--substitute-message")
    p.add_argument("--substitute-tag")
    p.add_argument("--message", help="bit string to authenticate")
    p.add_argument("--tag-bits", type=int, default=8)
    p.add_argument("--message-bits", type=int, default=16)
    p.add_argument("--run-mode", choices=("abstract", "simulated"),
                   default="abstract")
    p.add_argument("--eps-rob-per-run", type=float, default=0.0)
    p.add_argument("--delta-t", type=float, default=1000.0)
    p.add_argument("--t-start", type=float, default=0.0)
    p.add_argument("--qpv-config", help="JSON file for the per-run "
                                        "verification config")
    p.set_defaults(func=cmd_simulate_msgauth)

    p = sim_sub.add_parser("keyexchange", help="composed exchanges")
    _add_common(p)
    p.add_argument("--protocol", type=int, choices=(1, 3), required=True)
    p.add_argument("--config", help="JSON file with key-agreement fields")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--adversary", default="none",
                   choices=("none", "tamper-bob-messages", "tamper-tag",
                            "block-final-qpv", "impersonate"))
    p.add_argument("--flip-indices", help="bit positions to flip")
    p.add_argument("--eps-qpv", type=float, default=0.0,
                   help="off-position pass probability for impersonate")
    p.add_argument("--eps-qpv-force", type=float, default=0.0)
    p.add_argument("--tag-bits", type=int, default=16)
    p.add_argument("--message-bits", type=int, default=2048)
    p.add_argument("--run-mode", choices=("abstract", "simulated"),
                   default="abstract")
    p.add_argument("--eps-rob-qpv", type=float, default=0.0)
    p.add_argument("--delta-t", type=float, default=1000.0)
    p.add_argument("--qpv-rounds", type=int, default=16)
    p.add_argument("--small-signals", action="store_true",
                   help="permit signalCount below the statistics floor")
    for flag, _ in QKD_FLAG_FIELDS.items():
        kind = int if flag in ("signal_count", "ec_passes",
                               "pa_output_bits") else float
        p.add_argument("--" + flag.replace("_", "-"), type=kind,
                       default=None)
    p.set_defaults(func=cmd_simulate_keyexchange)

    b = sub.add_parser("bounds", help="closed-form security quantities")
    b_sub = b.add_subparsers(dest="bounds_command", required=True)

    def bound_parser(name: str, func, **flags):
        bp = b_sub.add_parser(name)
        _add_common(bp)
        bp.add_argument("--plain", action="store_true",
                        help="print the headline value only")
        for flag, (kind, default) in flags.items():
            bp.add_argument("--" + flag.replace("_", "-"), type=kind,
                            default=default,
                            required=default is None)
        bp.set_defaults(func=func)
        return bp

    bound_parser("one-way-auth", cmd_bounds_one_way_auth,
                 eps_qkd=(float, 0.0), l_t=(int, 16), eps_qpv=(float, 0.0)
                 ).add_argument("--variant", default="reciprocal",
                                choices=("reciprocal", "exponential"))
    bound_parser("msg-auth", cmd_bounds_msg_auth, l_k=(int, 2),
                 eps_qpv=(float, 0.0), delta=(float, 0.0),
                 eps_rob=(float, 0.0))
    bound_parser("credential", cmd_bounds_credential, eps_qkd=(float, 0.0),
                 eps_qpv=(float, 0.0), eps_rob_qkd=(float, 0.0),
                 eps_rob_qpv=(float, 0.0), delta_hash=(float, 0.0),
                 l_t=(int, 16), l_k=(int, 2))
    bound_parser("nets", cmd_bounds_nets, q=(int, 1), delta=(float, 1.0))
    bound_parser("rounding", cmd_bounds_rounding, q=(int, 0),
                 delta_tilde=(float, 0.5))
    bound_parser("rounding-failure", cmd_bounds_rounding_failure,
                 q0=(float, 4.0), delta_tilde=(float, 0.5),
                 alpha_frac=(float, 0.0))
    bound_parser("partition-lb", cmd_bounds_partition_lb,
                 eta_r=(float, 1.0), eta_thres=(float, 0.0),
                 eps_thres=(float, 0.1), eta=(float, 1.0), nu=(float, 0.5),
                 grid_step=(float, 1e-3))
    elb = bound_parser("error-lb", cmd_bounds_error_lb, eta=(float, 1.0),
                       eta_thres=(float, 0.0), eps_thres=(float, 0.1),
                       nu=(float, 0.5))
    elb.add_argument("--alpha", type=float, default=None)
    curves = b_sub.add_parser("threshold-curves")
    _add_common(curves)
    curves.set_defaults(format="csv")
    curves.add_argument("--table", default=STUB_TABLE)
    curves.add_argument("--q0-list", default="10,15")
    curves.add_argument("--eta-list", default="0.5,0.6,0.7,0.8,0.9,1.0")
    curves.add_argument("--eta-range", help="start:stop:count")
    curves.add_argument("--alpha-frac", type=float, default=1e-10)
    curves.set_defaults(func=cmd_bounds_threshold_curves)
    manifest_p = b_sub.add_parser("manifest")
    _add_common(manifest_p)
    manifest_p.set_defaults(func=cmd_bounds_manifest)

    c = sub.add_parser("codec", help="constant-weight codeword transforms")
    c_sub = c.add_subparsers(dest="codec_command", required=True)
    for name, value_flag in (("enc", "key"), ("dec", "word")):
        cp = c_sub.add_parser(name)
        _add_common(cp)
        cp.add_argument("--lk", type=int, required=True)
        cp.add_argument("--" + value_flag, required=True)
        cp.add_argument("--hex", action="store_true",
                        help="input is hex, leftmost bit first")
        cp.set_defaults(func=cmd_codec)

    h = sub.add_parser("hash", help="keyed tag evaluation")
    h_sub = h.add_subparsers(dest="hash_command", required=True)
    hp = h_sub.add_parser("tag")
    _add_common(hp)
    hp.add_argument("--l-t", type=int, required=True)
    hp.add_argument("--n", type=int, required=True)
    hp.add_argument("--key", required=True)
    hp.add_argument("--message", required=True)
    hp.add_argument("--hex", action="store_true")
    hp.set_defaults(func=cmd_hash_tag)

    v = sub.add_parser("validate", help="check a config or table document")
    _add_common(v)
    v.add_argument("kind", choices=("delta-table", "qpv-config",
                                    "qkd-config"))
    v.add_argument("path")
    v.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PvkexError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
