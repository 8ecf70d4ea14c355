"""Smoke test for the pycoopmud extension module.

Build and install first:

    pip install --no-build-isolation -e crates/python
    python python/smoke_test.py
"""

import json
import math

import pycoopmud as cm


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    assert close(cm.q_function(0.0), 0.5)
    assert close(cm.spectral_efficiency(2, 1), 0.5)
    assert close(cm.asymptotic_efficiency(1.0, 0.8, 0.8), 0.36, 1e-9)
    assert cm.optimal_coding_set_size(0.005, 0.005, 0.005, 50) == 50
    assert close(cm.special_case_avg_ber(0.1, 0.05, 0.05, 4, 2), 0.061418125, 1e-9)
    assert close(cm.large_system_decorrelator(0.25), 0.75)

    beta, s, p = 0.7, 0.4, 2.5
    b = s + beta * p - p
    root = (-b + math.sqrt(b * b + 4 * p * s)) / (2 * p)
    assert close(cm.large_system_mmse(beta, s, [p]), root, 1e-10)

    st = cm.large_system_optimal(0.5, 1.0)
    assert 0.0 <= st["eta"] <= 1.0 and st["residual"] <= 1e-10

    p2 = cm.q_function(2 / math.sqrt(1 + 1 / 8))
    p1 = cm.q_function(1 / math.sqrt(1 + 0.5 * 4 * p2))
    got = cm.analytic_ber_sic([1.0, 2.0], 1.0, 8)
    assert close(got[0], p1) and close(got[1], p2)

    bound = cm.analytic_ber_optimal_bound([1.0, 2.0], [[1, 0.8], [0.8, 1]], 0.7, 0)
    want = cm.q_function(1 / 0.7) + 0.5 * cm.q_function(math.sqrt(1 + 4 - 3.2) / 0.7)
    assert close(bound, want)

    try:
        cm.spectral_efficiency(2, 2)
    except ValueError as e:
        assert "relay count" in str(e)
    else:
        raise AssertionError("expected ValueError")

    spec = {
        "parameter": "tx-power-db",
        "grid": [12.0, 16.0],
        "detectors": [{"kind": "sic"}],
        "variants": ["no-relay", "relay-xor"],
        "stopping": {"min_errors": 50, "max_bits": 20000},
    }
    a = json.loads(cm.run_sweep(json.dumps(spec), workers=1))
    b = json.loads(cm.run_sweep(json.dumps(spec), workers=2))
    assert a == b
    assert len(a["rows"]) == 4
    for row in a["rows"]:
        assert row["bits"] > 0 and 0.0 <= row["ber"] <= 1.0

    print("pycoopmud smoke test passed")


if __name__ == "__main__":
    main()
