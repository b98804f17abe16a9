#!/usr/bin/env python3
"""The pair-comparison study, end to end and headless.

Builds a small study from the demo model (original / unmasked attack /
masked attack triples), then walks a scripted participant through the
whole HTTP protocol in-process: create a session, fetch each blinded
trial, download both images, answer, and finally pull the aggregate
report. To run the same study for real participants:

    advmask prepare-study --weights demos/output/model.nnw \
        --dataset <dir> --out study/ --pairs 20 --png
    advmask serve --study study/study.json --responses study/responses.jsonl \
        --static-dir frontend/dist --port 8000
"""

import json

import numpy as np
from fastapi.testclient import TestClient

from advmask.attacks import AttackConfig, bim, ebim
from advmask.image import Image, save_image
from advmask.model import forward
from advmask.service import create_app
from advmask.study import ImageTriple, Study, StudyConfig

from _common import demo_test_set, ensure_model, output_dir

out = output_dir("07_study")
model = ensure_model()
xs, _ = demo_test_set()

print("\nbuilding 4 stimulus triples (original, unmasked, masked) ...")
rng = np.random.default_rng(3)
triples = []
i = 0
while len(triples) < 4 and i < len(xs):
    img = Image(xs[i])
    i += 1
    before = forward(model, img)
    target = (before.label + 4) % 10
    cfg = AttackConfig(mode="targeted", target_label=target,
                       certainty_threshold=0.99, stepsize=0.004,
                       max_iterations=1000)
    plain = bim(model, img, cfg)
    masked = ebim(model, img, cfg)
    if not (plain.success and masked.success):
        continue
    pid = f"pair{len(triples)}"
    paths = {}
    for role, image in (("original", img), ("bim", plain.adversarial),
                        ("ebim", masked.adversarial)):
        p = out / f"{pid}_{role}.pgm"
        save_image(image, p)
        paths[role] = str(p)
    triples.append(ImageTriple(pid, paths["original"], paths["bim"],
                               paths["ebim"]))

config = StudyConfig(tuple(triples), display_duration_ms=5000)
study = Study(config, out / "responses.jsonl")
client = TestClient(create_app(study))

info = client.post("/api/session", json={"seed": 1}).json()
print(f"session {info['session_id'][:8]}..., {info['trial_count']} trials, "
      f"buttons shown as {info['button_order']}")

sid = info["session_id"]
for idx in range(info["trial_count"]):
    trial = client.get(f"/api/trial/{sid}/{idx}").json()
    left = client.get(trial["left_url"]).content
    right = client.get(trial["right_url"]).content
    # a lazy scripted participant: byte-equal means "identical"
    choice = "identical" if left == right else "different"
    client.post(f"/api/response/{sid}/{idx}",
                json={"choice": choice, "latency_ms": 900.0})

report = client.get("/api/results").json()
session = report["sessions"][0]
print("\nthis participant compared raw bytes, so they spot every attack:")
print(f"  'identical' rate by condition: none {session['mu_none']:.2f}, "
      f"unmasked {session['mu_bim']:.2f}, masked {session['mu_ebim']:.2f}")
print(f"responses logged to {study.responses_path}")
print(json.dumps({"complete_sessions": report["complete_sessions"],
                  "note": report.get("note")}, indent=2))
