"""Command-line client of the simulation service.

Every subcommand builds a request, sends it to the service (in process by
default, or to a remote instance via --server), and formats the response as
CSV or JSON.  `stcsim serve` hosts the same app over HTTP.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

import click
import httpx


def _client(server: str | None):
    if server:
        return httpx.Client(base_url=server, timeout=None)
    # In-process transport: the CLI talks to the same app tests exercise.
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DeprecationWarning)
        from fastapi.testclient import TestClient

    from .service.app import app

    return TestClient(app)


def _post(ctx, endpoint: str, payload: dict) -> dict:
    with _client(ctx.obj.get("server")) as client:
        resp = client.post(endpoint, json=payload)
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail", resp.text)
        except Exception:
            detail = resp.text
        click.echo(f"error ({resp.status_code}): {detail}", err=True)
        sys.exit(1)
    return resp.json()


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.is_file():
        click.echo(f"config file not found: {path}", err=True)
        sys.exit(1)
    if p.suffix == ".toml":
        return tomllib.loads(p.read_text())
    return json.loads(p.read_text())


def _merge(cfg: dict, **flags) -> dict:
    """Config-file values fill in flags the user did not pass."""
    out = dict(cfg)
    for key, value in flags.items():
        if value is not None:
            out[key] = value
    return out


def _floats(text) -> list[float]:
    return [float(v) for v in str(text).split(",") if str(v).strip()]


def _ints(text) -> list[int]:
    return [int(v) for v in str(text).split(",") if str(v).strip()]


def _emit(text: str, out: str | None, append: bool = False):
    if out:
        mode = "a" if append else "w"
        with open(out, mode) as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


def _experiment_payload(cfg: dict) -> dict:
    payload = {
        "code": cfg.get("code"),
        "nr": cfg.get("nr"),
        "mod": int(cfg.get("mod", 4)),
        "decoder": cfg.get("decoder", "simp"),
        "mc": _ints(cfg.get("mc", "16")) if not isinstance(cfg.get("mc", "16"), list)
              else [int(v) for v in cfg["mc"]],
        "snr_db": _floats(cfg.get("snr", "10")) if not isinstance(cfg.get("snr", "10"), list)
                  else [float(v) for v in cfg["snr"]],
        "trials": int(cfg.get("trials", 100_000)),
        "seed": int(cfg.get("seed", 0)),
        "max_errors": cfg.get("max_errors", 200) or None,
        "noiseless": bool(cfg.get("noiseless", False)),
    }
    if payload["code"] is None:
        click.echo("a code reference is required (--code)", err=True)
        sys.exit(1)
    return payload


def _common_options(fn):
    for opt in reversed([
        click.option("--code", help="library code name or code-file path"),
        click.option("--nr", type=int, help="receive antennas (default: rate)"),
        click.option("--mod", type=int, help="PAM levels per real dimension"),
        click.option("--mc", help="survivor budgets, comma separated"),
        click.option("--snr", help="SNR points in dB, comma separated"),
        click.option("--trials", type=int, help="Monte Carlo trials per point"),
        click.option("--seed", type=int, help="master seed"),
        click.option("--decoder", type=click.Choice(["trad", "simp", "ml"])),
        click.option("--max-errors", "max_errors", type=int,
                     help="stop a point early after this many bit errors "
                          "(default 200; 0 disables)"),
        click.option("--noiseless", is_flag=True, default=None),
        click.option("--out", help="output file (default: stdout)"),
        click.option("--format", "fmt", type=click.Choice(["csv", "json"]),
                     help="output format"),
        click.option("--config", help="TOML or JSON config file with defaults"),
    ]):
        fn = opt(fn)
    return fn


@click.group()
@click.option("--server", help="base URL of a running service "
                               "(default: run in process)")
@click.pass_context
def main(ctx, server):
    """Space-time code classification, decoding, and BER/complexity sweeps."""
    ctx.ensure_object(dict)
    ctx.obj["server"] = server


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def serve(host, port):
    """Host the experiment service over HTTP."""
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=host, port=port)


@main.command()
@click.pass_context
def codes(ctx):
    """List built-in codes."""
    with _client(ctx.obj.get("server")) as client:
        resp = client.get("/codes")
    data = resp.json()
    click.echo("available names: " + ", ".join(data["names"]))
    for info in data["details"]:
        click.echo(f"  {info['name']:22s} T={info['T']} Nt={info['Nt']} "
                   f"L={info['L']} rate={info['rate']:g}")


@main.command()
@click.option("--code", "code_refs", multiple=True, required=True,
              help="code to classify (repeatable)")
@click.option("--nr", type=int)
@click.option("--draws", type=int, default=16)
@click.option("--tol", type=float, default=1e-8)
@click.option("--seed", type=int, default=0)
@click.option("--out")
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text")
@click.pass_context
def classify(ctx, code_refs, nr, draws, tol, seed, out, fmt):
    """Block-orthogonal structure reports for one or more codes."""
    data = _post(ctx, "/classify", {
        "codes": list(code_refs), "nr": nr, "draws": draws,
        "tol": tol, "seed": seed,
    })
    if fmt == "json":
        _emit(json.dumps(data, indent=1) + "\n", out)
        return
    lines = []
    for res in data["results"]:
        if res["structured"]:
            p = res["profile"]
            profile = (f"({p['n_blocks']}, {p['units_per_block']}, "
                       f"{p['unit_size']})")
        else:
            profile = "unstructured"
        certs = all(c["passed"] for c in res["certificates"])
        lines.append(f"{res['code']:22s} T={res['T']} Nt={res['Nt']} "
                     f"L={res['L']:3d} Nr={res['Nr']}  profile={profile:14s} "
                     f"certificates={'pass' if certs and res['structured'] else '-'}")
    _emit("\n".join(lines) + "\n", out)


@main.command()
@_common_options
@click.pass_context
def decode(ctx, config, out, fmt, **flags):
    """Decode one random transmission and show the full bookkeeping."""
    cfg = _merge(_load_config(config), **flags)
    data = _post(ctx, "/decode", _experiment_payload(cfg))
    _emit(json.dumps(data, indent=1) + "\n", out)


@main.command("ber-sweep")
@click.option("--resume/--no-resume", default=True,
              help="skip (snr, mc) points already present in --out")
@_common_options
@click.pass_context
def ber_sweep(ctx, resume, config, out, fmt, **flags):
    """BER and average complexity over an SNR x survivor-budget grid."""
    from .experiments import CSV_HEADER, parse_csv_points

    cfg = _merge(_load_config(config), **flags)
    payload = _experiment_payload(cfg)
    fmt = fmt or cfg.get("format", "csv")
    out = out or cfg.get("out")

    done = set()
    existing = ""
    if resume and out and Path(out).is_file():
        existing = Path(out).read_text()
        done = parse_csv_points(existing)
    all_points = [(s, c) for s in payload["snr_db"] for c in payload["mc"]]
    missing = [p for p in all_points if p not in done]
    if not missing:
        click.echo("all points already present; nothing to do", err=True)
        return
    if done:
        payload["points"] = [list(p) for p in missing]

    data = _post(ctx, "/ber-sweep", payload)
    records = data["records"]
    if fmt == "json":
        _emit(json.dumps(records, indent=1) + "\n", out)
        return
    rows = [_record_csv(r) for r in records]
    if out and existing.strip():
        _emit("\n".join(rows) + "\n", out, append=True)
    else:
        _emit(CSV_HEADER + "\n" + "\n".join(rows) + "\n", out)


def _record_csv(r: dict) -> str:
    return ",".join([
        r["code"], repr(float(r["snr_db"])), str(r["mc"]), str(r["trials"]),
        str(r["bit_errors"]), repr(float(r["ber"])), repr(float(r["ber_ci_lo"])),
        repr(float(r["ber_ci_hi"])), repr(float(r["avg_metric_evals"])),
        r["decoder"], str(r["seed"]),
    ])


@main.command("mceq-stats")
@_common_options
@click.pass_context
def mceq_stats(ctx, config, out, fmt, **flags):
    """Average distinct-ancestor counts per decoding stage."""
    cfg = _merge(_load_config(config), **flags)
    payload = _experiment_payload(cfg)
    payload["decoder"] = "simp"
    data = _post(ctx, "/mceq-stats", payload)
    if (fmt or "json") == "csv":
        lines = ["snr_db,mc,stage,mceq_mean,mceq_over_mc"]
        for row in data["rows"]:
            for stage, (mean, ratio) in enumerate(
                    zip(row["mceq_mean"], row["mceq_over_mc"])):
                lines.append(f"{row['snr_db']!r},{row['mc']},{stage},"
                             f"{mean!r},{ratio!r}")
        _emit("\n".join(lines) + "\n", out)
    else:
        _emit(json.dumps(data, indent=1) + "\n", out)


@main.command()
@_common_options
@click.pass_context
def complexity(ctx, config, out, fmt, **flags):
    """Plain vs structure-aware decoding complexity per survivor budget."""
    cfg = _merge(_load_config(config), **flags)
    data = _post(ctx, "/complexity", _experiment_payload(cfg))
    if (fmt or "csv") == "json":
        _emit(json.dumps(data, indent=1) + "\n", out)
        return
    lines = ["snr_db,mc,trials,traditional_formula,traditional_measured,"
             "simplified_measured,ratio,reduction_bound"]
    for r in data["rows"]:
        lines.append(f"{r['snr_db']!r},{r['mc']},{r['trials']},"
                     f"{r['traditional_formula']!r},{r['traditional_measured']!r},"
                     f"{r['simplified_measured']!r},{r['ratio']!r},"
                     f"{r['reduction_bound']!r}")
    _emit("\n".join(lines) + "\n", out)


@main.command("ber-vs-complexity")
@click.option("--saturation-factor", type=float, default=1.05,
              help="BER factor over the floor that counts as saturated")
@_common_options
@click.pass_context
def ber_vs_complexity(ctx, saturation_factor, config, out, fmt, **flags):
    """BER against measured complexity at fixed SNR, with saturation point."""
    cfg = _merge(_load_config(config), **flags)
    payload = _experiment_payload(cfg)
    payload["saturation_factor"] = saturation_factor
    data = _post(ctx, "/ber-vs-complexity", payload)
    if (fmt or "csv") == "json":
        _emit(json.dumps(data, indent=1) + "\n", out)
        return
    lines = ["snr_db,mc,avg_metric_evals,ber,ber_ci_lo,ber_ci_hi,saturation_mc"]
    for snr, series in data["series"].items():
        for p in series["points"]:
            lines.append(f"{snr},{p['mc']},{p['avg_metric_evals']!r},"
                         f"{p['ber']!r},{p['ber_ci_lo']!r},{p['ber_ci_hi']!r},"
                         f"{series['saturation_mc']}")
    _emit("\n".join(lines) + "\n", out)


@main.command("search-coeffs")
@click.option("--start", type=float, default=0.0)
@click.option("--stop", type=float, default=1.5707963267948966)
@click.option("--step", type=float, default=0.1)
@click.option("--thetas", help="explicit phases, comma separated "
                               "(overrides start/stop/step)")
@click.option("--mod", type=int, default=2)
@click.option("--no-classify", is_flag=True, default=False)
@click.option("--max-vectors", type=int, default=1 << 25)
@click.option("--seed", type=int, default=0)
@click.option("--out")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv")
@click.pass_context
def search_coeffs(ctx, start, stop, step, thetas, mod, no_classify,
                  max_vectors, seed, out, fmt):
    """Grid search of the rate-2 design phase by minimum determinant."""
    payload = {
        "start": start, "stop": stop, "step": step, "mod": mod,
        "classify": not no_classify, "max_vectors": max_vectors, "seed": seed,
    }
    if thetas:
        payload["thetas"] = _floats(thetas)
    data = _post(ctx, "/search-coeffs", payload)
    if fmt == "json":
        _emit(json.dumps(data, indent=1) + "\n", out)
        return
    lines = ["theta,min_det,profile"]
    for p in data["points"]:
        profile = "" if p["profile"] is None else \
            "(" + " ".join(str(v) for v in p["profile"]) + ")"
        lines.append(f"{p['theta']!r},{p['min_det']!r},{profile}")
    lines.append(f"# best_theta={data['best_theta']!r} "
                 f"best_min_det={data['best_min_det']!r}")
    _emit("\n".join(lines) + "\n", out)


if __name__ == "__main__":
    main()
