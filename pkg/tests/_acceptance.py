"""Registry for the one-line verdicts printed after the acceptance run."""

RESULTS = {}


def record(name, ok, detail):
    RESULTS[name] = (bool(ok), detail)
    print(f"{name}: {'PASS' if ok else 'FAIL'} ({detail})")
    return ok
