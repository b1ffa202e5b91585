"""Walkthrough: judge prompts, corruption baselines, score parsing, and the
endpoint client exercised against a local mock (runs fully offline).

Run: python demos/05_judge_harness.py
"""

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from procrew import build_judge_prompt, call_judge, corrupt, parse_judge_scores, parse_procedure
from procrew.judge import MODE_BOTH, MODE_REAGENT

REFERENCE = """\
make_solution(solute=[chem("benzaldehyde", mass=5 g)], solvent=chem("methanol", volume=50 mL)) -> mix(1);
add(source=[chem("sodium borohydride", mass=1 g)], target=mix(1)) -> mix(2);
wait(time_period=2 h);
quench(target=mix(2), agent=chem("ammonium chloride")) -> mix(3);
yield_statement(product=chem("benzyl alcohol"), target=mix(3));
"""

ref = parse_procedure(REFERENCE)
candidate = corrupt(ref, MODE_REAGENT, rng_seed=42)  # a deliberately bad prediction

prompt = build_judge_prompt(ref, candidate)
print("=== judge prompt ===")
print(prompt)

# a tiny OpenAI-compatible mock endpoint; a real deployment points --endpoint
# at an actual chat-completions URL instead
CANNED = "The candidate replaces a key reagent with nonsense.\nSCORES: reaction=12 workup=25 conditions=14 safety=8"


class Mock(BaseHTTPRequestHandler):
    def log_message(self, *args):
        pass

    def do_POST(self):
        self.rfile.read(int(self.headers.get("Content-Length") or 0))
        body = json.dumps({"choices": [{"message": {"role": "assistant", "content": CANNED}}]}).encode()
        self.send_response(200)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


server = ThreadingHTTPServer(("127.0.0.1", 0), Mock)
thread = threading.Thread(target=server.serve_forever, daemon=True)
thread.start()
try:
    url = f"http://127.0.0.1:{server.server_address[1]}/v1/chat/completions"
    response = call_judge(url, "mock-judge", prompt, timeout=10)
    print("\n=== judge response ===")
    print(response)
    scores = parse_judge_scores(response)
    print("\nparsed scores:", scores.to_json_dict())
finally:
    server.shutdown()
    server.server_close()
    thread.join(timeout=2)

# corruption modes are deterministic per seed; "both" composes reagent
# replacement with an action swap
both = corrupt(ref, MODE_BOTH, rng_seed=42)
print("\n=== 'both' corruption of the reference ===")
from procrew import render_procedure

print(render_procedure(both))
