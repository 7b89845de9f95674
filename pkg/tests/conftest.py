import pytest

# small enough that a full ae-train / tts-train / synth cycle runs in seconds
TINY_CONFIG = {
    "ae": {"channels": [8, 8, 8, 8], "crop": 4096, "batch": 2, "steps": 3},
    "tts": {"d_model": 16, "ape_layers": 1, "int_layers": 1, "ff_hidden": 16},
    "diffusion": {"channels": 8, "blocks": 2, "cycle": 2, "T": 5},
    "train": {"steps": 3, "batch": 2},
}


@pytest.fixture
def tiny_config():
    from latentspeech.pipeline import config_from_dict

    return config_from_dict(TINY_CONFIG)


def pytest_terminal_summary(terminalreporter):
    """One pass/fail line per acceptance criterion, when that module ran."""
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results, key=lambda k: (int(k.rstrip("abc")), k)):
        ok, detail = results[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
