"""Drive the annotation HTTP API with scripted annotators.

Points at a running `contrastbench serve-annotation` instance, completes all
filter tasks (accepting everything), then rates every task with a planted
per-annotator bias so the export has a known agreement structure. Attention
checks are answered from the instructed range parsed out of the task text.

Usage: python scripts/simulate_annotators.py http://127.0.0.1:8760 a1 a2 a3
"""

import re
import sys

import requests

RANGE_RE = re.compile(r"between (\d+\.\d+) and (\d+\.\d+)")


def rating_for(task, annotator_index):
    if task.get("is_attention_check"):
        match = RANGE_RE.search(task["prompt_text"])
        lo, hi = float(match.group(1)), float(match.group(2))
        return round((lo + hi) / 2, 2)
    # deterministic base value per task plus a small per-annotator offset
    base = 1.0 + (hash(task["task_id"]) % 300) / 100.0
    return round(min(5.0, base + 0.1 * annotator_index), 2)


def run(base_url, annotators):
    session = requests.Session()
    for index, annotator in enumerate(annotators):
        completed = 0
        while True:
            task = session.get(
                f"{base_url}/tasks/next", params={"annotator": annotator}
            ).json()
            if task.get("done"):
                break
            if task["kind"] == "filter":
                for image in task["images"]:
                    session.post(
                        f"{base_url}/tasks/{task['task_id']}/filter",
                        json={
                            "image_id": image["image_id"],
                            "decision": "accept",
                            "annotator": annotator,
                        },
                    )
            else:
                session.post(
                    f"{base_url}/tasks/{task['task_id']}/rate",
                    json={"value": rating_for(task, index), "annotator": annotator},
                )
            completed += 1
        print(f"{annotator}: completed {completed} tasks")
    print(session.get(f"{base_url}/progress").json())


if __name__ == "__main__":
    if len(sys.argv) < 3:
        sys.exit(__doc__)
    run(sys.argv[1].rstrip("/"), sys.argv[2:])
