"""Parse full commands into navigation instructions, then serve over HTTP.

Inference scores every action on the page, resolves each parameter
independently (open parameters take the mention verbatim at confidence 1;
closed parameters take their best value if it clears the threshold rho),
discards parametrized candidates whose parameters all fell away, and
blends action score with mean assignment confidence via alpha.

Run:  python demos/03_parse_and_serve.py
"""

from __future__ import annotations

import json
import threading
from http.client import HTTPConnection

from navparse import InferenceConfig, prediction_to_dict
from navparse.server import serve

from common import demo_bundle

schema, train, valid, test, bundle = demo_bundle()

# ---------------------------------------------------------------------------
# 1. Parse a few commands
# ---------------------------------------------------------------------------
for page_id, command in [
    ("home", "find a table for me and my friend at 7 pm"),
    ("home", "get me a sushi table at 8 pm"),
    ("home", "log me in"),
    ("results", "only show cheap places"),
    ("results", "sort by best rated"),
]:
    prediction = bundle.parse(schema, page_id, command)
    if prediction is None:
        print(f"[{page_id}] {command!r} -> no executable instruction")
        continue
    assignments = {a.parameter: (a.value, round(a.confidence, 3))
                   for a in prediction.assignments}
    print(f"[{page_id}] {command!r}\n"
          f"    -> {prediction.instruction.action!r} {assignments} "
          f"(total {prediction.total:.3f})")

# ---------------------------------------------------------------------------
# 2. The threshold rho controls how eager closed-domain assignment is
# ---------------------------------------------------------------------------
from navparse import parse

command = "find a table for me and my friend at 7 pm"
print(f"\nsweeping rho for {command!r}:")
for rho in (0.0, bundle.inference.rho, 1.0):
    config = InferenceConfig(rho=rho, alpha=bundle.inference.alpha)
    prediction = parse(bundle.parser_models(), schema, "home", command,
                       config)
    kept = [] if prediction is None else \
        [a.parameter for a in prediction.assignments]
    print(f"  rho={rho:<5} assigned parameters: {kept}")

# ---------------------------------------------------------------------------
# 3. The same parse over HTTP
# ---------------------------------------------------------------------------
server = serve(bundle, schema, port=0)
threading.Thread(target=server.serve_forever, daemon=True).start()
host, port = server.server_address[:2]
print(f"\nserving on http://{host}:{port}")

conn = HTTPConnection(host, port, timeout=30)
conn.request("GET", "/v1/health")
print("health:", conn.getresponse().read().decode())

conn.request("POST", "/v1/parse",
             body=json.dumps({"command": command, "page_id": "home"}),
             headers={"Content-Type": "application/json"})
payload = json.loads(conn.getresponse().read())
print(f"POST /v1/parse -> action {payload['prediction']['action']!r}, "
      f"latency {payload['latency_ms']:.1f} ms, version {payload['version']}")

local = prediction_to_dict(command, "home", bundle.parse(schema, "home",
                                                         command))
assert payload["prediction"] == local["prediction"]
print("HTTP and in-process predictions agree")
conn.close()
server.shutdown()
server.server_close()
