"""Pass/fail lines collected by the acceptance tests and printed in the terminal summary."""

RESULTS = {}


def record(number: int, passed: bool, title: str, detail: str) -> None:
    line = f"{'PASS' if passed else 'FAIL'} criterion {number:>2}: {title}: {detail}"
    RESULTS[number] = line
    print(line)
