"""Regenerate the bundled synthetic separation table.

The bundled table is a stand-in so the threshold optimizer runs with no
solver component built.  Values follow a smooth monotone surface pinned
to the zero-error full-transmission separation of about 1/sqrt(2); they
are synthetic and carry a provenance marker saying so.  Replace with
solver-emitted tables for real parameter studies.
"""

import json
import pathlib

OUT = (pathlib.Path(__file__).resolve().parent.parent
       / "src" / "pvkex" / "data" / "stub_delta_tilde.json")


def surface(eps_tilde: float, eta_tilde: float) -> float:
    base = 0.7071 * (1.0 - eps_tilde / 0.66) * (0.6 + 0.4 * eta_tilde)
    return round(max(0.02, base), 6)


def main() -> None:
    eps_values = [round(0.05 * i, 2) for i in range(14)]
    eta_values = [round(0.1 * j, 1) for j in range(11)]
    grid = [{"eps_tilde": e, "eta_tilde": h, "delta_tilde": surface(e, h)}
            for e in eps_values for h in eta_values]
    doc = {
        "meta": {
            "npa_level": 0,
            "solver_tol": 0.0,
            "generator": "synthetic stub surface, not solver output",
            "provenance": "synthetic",
        },
        "grid": grid,
    }
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n",
                   encoding="utf-8")
    print(f"wrote {OUT} ({len(grid)} entries)")


if __name__ == "__main__":
    main()
