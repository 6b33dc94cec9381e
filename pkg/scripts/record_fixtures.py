#!/usr/bin/env python3
"""Regenerate the recorded completion fixtures under tests/fixtures/llm/.

Runs the real pipeline stages in record mode against a scripted transport
that answers each prompt kind deterministically, so the offline suite can
replay the whole case study byte-for-byte. Re-run after changing the
catalog, templates, retrieval defaults, or anything else that alters a
prompt (fixture digests cover the full request).

Usage: python3 scripts/record_fixtures.py
"""

from __future__ import annotations

import json
import os
import shutil
import sys
from pathlib import Path

import httpx

REPO = Path(__file__).resolve().parent.parent
FIXTURES = REPO / "tests" / "fixtures"
sys.path.insert(0, str(REPO / "src"))

from chaingen import chain_rules  # noqa: E402
from chaingen.config import load_config  # noqa: E402
from chaingen.llm_gateway import LlmGateway  # noqa: E402
from chaingen.pipeline import generate_chain, load_catalog, run_pipeline, select_signals  # noqa: E402

SCENARIO = "Vehicle should activate hazard lights when camera or LIDAR detects a pedestrian"
REFINE_FEEDBACK = "Budget a short pause before resuming normal operation"
CONSTRAINTS = (
    "camera before hazard; hazard after receiving; "
    "reaction to pedestrian detection should be performed within 90ms"
)

SIGNAL_REPLY = (
    "Vehicle.Body.Lights.Hazard, Vehicle.ADAS.Camera.Front.IsActive, "
    "Vehicle.ADAS.Lidar.IsActive, Vehicle.Imaginary.PedestrianGuard"
)

RULE_SCRIPT_REPLY = """#!/bin/sh
python3 event_chain_validator.py --json event_chain.json --rule "order:camera before hazard"
python3 event_chain_validator.py --json event_chain.json --rule "order:hazard after receiving"
python3 event_chain_validator.py --json event_chain.json --rule "time:hazard <= 90"
"""

CODE_REPLY = """```cpp
// Decision logic: activate hazard lights on pedestrian detection.
#include <iostream>
#include <string>

#include <mqtt/async_client.h>
#include <capnproto/types/vehicle/body/lights/hazard.h>

static const std::string BROKER_URI = "tcp://localhost:1883";
static const std::string CLIENT_ID = "hazard_decision_module";

int ret = 0;
uint64_t result_id = 0;

void call_runner() {
    // Actuates Vehicle.Body.Lights.Hazard
    auto set_hazard = create_caller<types::vehicle::body::lights::Hazard>();

    types::vehicle::body::lights::Hazard hazard_value{};
    hazard_value.set_is_signaling(true);
    ret = set_hazard.call(hazard_value, &result_id);
    std::cout << "Actuator triggered: hazard lights signaling" << std::endl;
}

class DetectionHandler : public virtual mqtt::callback {
public:
    void message_arrived(mqtt::const_message_ptr msg) override {
        std::cout << "Message received on " << msg->get_topic()
                  << ": " << msg->to_string() << std::endl;
        if (msg->to_string() == "1") {
            call_runner();
        }
    }
};

int main() {
    mqtt::async_client client(BROKER_URI, CLIENT_ID);
    DetectionHandler handler;
    client.set_callback(handler);

    client.connect()->wait();
    client.subscribe("camera-front-detect", 1)->wait();
    client.subscribe("lidar-detect", 1)->wait();

    while (true) {
    }
    return 0;
}
```"""


def scripted_reply(prompt: str) -> str:
    if "select all relevant Vehicle Signal Specification" in prompt:
        return SIGNAL_REPLY
    if "You are updating PlantUml activity diagram" in prompt:
        if REFINE_FEEDBACK in prompt:
            return (FIXTURES / "chains" / "reference_refined.puml").read_text(encoding="utf-8")
        return (FIXTURES / "chains" / "reference.puml").read_text(encoding="utf-8")
    if "generate a shell script" in prompt:
        return RULE_SCRIPT_REPLY
    if "You are generating C++ code" in prompt:
        return CODE_REPLY
    raise AssertionError(f"no scripted reply for prompt: {prompt[:120]!r}")


def make_transport() -> httpx.MockTransport:
    def handler(request: httpx.Request) -> httpx.Response:
        body = json.loads(request.content.decode("utf-8"))
        prompt = body["messages"][-1]["content"]
        payload = {
            "choices": [
                {"message": {"role": "assistant", "content": scripted_reply(prompt)},
                 "finish_reason": "stop"}
            ],
            "usage": {"prompt_tokens": 0, "completion_tokens": 0},
        }
        return httpx.Response(200, json=payload)

    return httpx.MockTransport(handler)


def main() -> None:
    llm_dir = FIXTURES / "llm"
    if llm_dir.exists():
        shutil.rmtree(llm_dir)
    llm_dir.mkdir(parents=True)

    os.environ.setdefault("LLM_API_KEY", "scripted")
    config = load_config(FIXTURES / "config.yaml")
    from dataclasses import replace

    config = replace(
        config,
        output_dir=Path("/tmp/chaingen-record-out"),
        provider=replace(config.provider, mode="record"),
    )
    transport = make_transport()

    # Batch pipeline records the selection, chain, and code fixtures.
    code = run_pipeline(
        config,
        SCENARIO,
        rules=[
            "order:camera before hazard",
            "order:hazard after receiving",
            "time:hazard <= 90",
        ],
        mode="batch",
        transport=transport,
    )
    if code != 0:
        raise SystemExit(f"recording pipeline run failed with exit code {code}")

    # The refine iteration issues one extra chain-generation request.
    gateway = LlmGateway(config.provider, config.model, transport=transport)
    catalog = load_catalog(config)
    select_signals(config, SCENARIO, catalog, gateway)  # same digest as the run above
    from chaingen.event_chain import to_plantuml

    initial = generate_chain(config, SCENARIO, gateway)
    generate_chain(
        config,
        f"{SCENARIO}\nAdditional feedback: {REFINE_FEEDBACK}",
        gateway,
        current_chain_text=to_plantuml(initial),
    )

    # Rule-script generation fixture.
    chain_rules.generate_rule_script(CONSTRAINTS, gateway)

    count = len(list(llm_dir.glob("*.json")))
    print(f"recorded {count} fixtures in {llm_dir}")


if __name__ == "__main__":
    main()
