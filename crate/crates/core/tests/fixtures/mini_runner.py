"""Minimal runner used by the engine's tests; not the production harness.

Reads one request document on stdin and writes one result document.
Per-case timeouts are not enforced.
"""
import copy
import json
import sys


def close(a, b):
    if isinstance(a, bool) or isinstance(b, bool):
        return a == b
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        return abs(a - b) <= 1e-9
    if isinstance(a, list) and isinstance(b, list):
        return len(a) == len(b) and all(close(x, y) for x, y in zip(a, b))
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(close(a[k], b[k]) for k in a)
    return a == b


def main():
    req = json.load(sys.stdin)
    scope = {}
    try:
        exec(req["code"], scope)
        fn = scope[req["function_name"]]
    except Exception as e:  # noqa: BLE001
        json.dump({"load_error": f"{type(e).__name__}: {e}", "results": []}, sys.stdout)
        return
    results = []
    for i, case in enumerate(req["cases"]):
        args = copy.deepcopy(case["inputs"])
        exp = case["expected"]
        mode = case["mode"]
        try:
            ret = fn(*args)
        except Exception as e:  # noqa: BLE001
            results.append({"case_index": i, "status": "runtime_error", "observed": repr(e)})
            continue
        status = "pass"
        if mode in ("return_value", "both") and not close(ret, exp.get("return")):
            status = "wrong_return"
        elif mode in ("argument_mutation", "both"):
            for pos, state in exp.get("arguments", {}).items():
                if not close(args[int(pos)], state):
                    status = "wrong_mutation"
        results.append({"case_index": i, "status": status, "observed": json.dumps(ret)})
    json.dump({"load_error": None, "results": results}, sys.stdout)


main()
