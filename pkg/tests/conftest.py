"""Shared pytest wiring for the acceptance suite.

Each test in test_acceptance.py covers one release criterion and may
record a short measurement note; this hook prints a single verdict line
per criterion at the end of the run so the gate is readable at a glance.
"""

ACCEPTANCE_MODULE = "test_acceptance.py"

CRITERIA = [
    ("test_gradient_correctness", "gradient correctness"),
    ("test_pk_oracle_equivalence", "Pk oracle equivalence"),
    ("test_loss_closed_form", "loss closed form"),
    ("test_masking_statistics", "masking statistics"),
    ("test_end_to_end_learning", "end-to-end learning"),
    ("test_ablation_grid", "ablation grid"),
    ("test_determinism_and_persistence", "determinism and persistence"),
]


def pytest_configure(config):
    config._acceptance_notes = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    outcomes = {}
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            if ACCEPTANCE_MODULE not in report.nodeid:
                continue
            name = report.nodeid.split("::")[-1]
            verdict = "PASS" if status == "passed" else "FAIL"
            # a setup/teardown error trumps an earlier pass
            if outcomes.get(name) != "FAIL":
                outcomes[name] = verdict
    if not outcomes:
        return
    notes = getattr(config, "_acceptance_notes", {})
    lines = ["acceptance criteria:"]
    for test_name, label in CRITERIA:
        verdict = outcomes.get(test_name, "NOT RUN")
        note = notes.get(test_name, "")
        lines.append(f"  {verdict:7s} {label}" + (f" ({note})" if note else ""))
    terminalreporter.write_line("\n".join(lines))
