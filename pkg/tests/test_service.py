import pytest
from fastapi.testclient import TestClient

from feedlab.domain import Arm, EngagementEvent, Experiment
from feedlab.experiment import StudyConfig
from feedlab.scoring import DelayedBackend, LexiconOracle
from feedlab.service import create_app
from feedlab.store import Store
from feedlab.study import StudyServer
from feedlab.surveys import DAY_MS

HOUR = 3_600_000
AAPA = "Senate vote {i}: the other party is pure evil, overturn the results, take up arms"


def posts(n=30, aapa=(), prefix="p"):
    return [{"post_id": f"{prefix}{i}", "author_id": "a",
             "text": AAPA.format(i=i) if i in aapa else f"Lovely walk {prefix} {i}"} for i in range(n)]


def enroll(client, pid, party="Democrat"):
    r = client.post("/v1/enroll", json={"participant_id": pid, "party": party, "platform": "BovitzLike",
                                        "enrolled_at": 0})
    assert r.status_code == 200
    return r.json()


def find(client, experiment, arm, start=0):
    for i in range(start, start + 300):
        a = enroll(client, f"u{i}")
        if (a["experiment"], a["arm"]) == (experiment.value, arm.value):
            return f"u{i}"
    raise AssertionError("assignment not found")


@pytest.fixture
def server():
    return StudyServer(Store(), StudyConfig(master_seed=3), p0=1.0)


@pytest.fixture
def client(server, small_bundle):
    return TestClient(create_app(server, reports=small_bundle.parent))


class TestRerank:
    def test_control_order(self, client):
        pid = find(client, Experiment.REDUCE, Arm.CONTROL)
        body = posts(aapa=(0, 4))
        r = client.post("/v1/rerank", json={"participant_id": pid, "load_seq": 0, "posts": body,
                                            "fetched_at": 4 * DAY_MS, "session_id": "s"})
        assert r.status_code == 200
        out = r.json()
        assert [x["post_id"] for x in out["items"]] == [p["post_id"] for p in body]
        assert out["session_id"] == "s" and out["diagnostics"]["over_budget"] is False

    def test_survey_display_uses_outparty(self, client):
        pid = find(client, Experiment.INCREASE, Arm.CONTROL)
        out = client.post("/v1/rerank", json={"participant_id": pid, "load_seq": 0, "posts": posts(),
                                              "fetched_at": HOUR}).json()
        s = out["survey"]
        assert s is not None and 0 <= s["render_index"] <= 30
        if s["kind"] == "Thermometer":
            assert "Republicans" in s["display"]["question"]

    def test_unknown_participant_404(self, client):
        r = client.post("/v1/rerank", json={"participant_id": "ghost", "load_seq": 0, "posts": posts()})
        assert r.status_code == 404 and r.json()["error"]

    def test_study_ended_409(self, client):
        pid = find(client, Experiment.REDUCE, Arm.CONTROL)
        r = client.post("/v1/rerank", json={"participant_id": pid, "load_seq": 0, "posts": posts(),
                                            "fetched_at": 30 * DAY_MS})
        assert r.status_code == 409

    def test_malformed_400(self, client):
        r = client.post("/v1/rerank", json={"participant_id": "x", "load_seq": -1, "posts": []})
        assert r.status_code == 400 and r.json()["error"] == "invalid_request"

    def test_timeout_diagnostics(self):
        slow = DelayedBackend(LexiconOracle(), delay_ms=2000)
        srv = StudyServer(Store(), StudyConfig(master_seed=3), slow, timeout_ms=100)
        c = TestClient(create_app(srv))
        try:
            pid = find(c, Experiment.REDUCE, Arm.TREATMENT)
            body = posts(aapa=(1, 2, 3))
            out = c.post("/v1/rerank", json={"participant_id": pid, "load_seq": 0, "posts": body,
                                             "fetched_at": 4 * DAY_MS}).json()
        finally:
            slow.release.set()
        assert [x["post_id"] for x in out["items"]] == [p["post_id"] for p in body]
        assert out["diagnostics"]["timeouts"] == 8


class TestEvents:
    def test_duplicate_envelope_stored_once(self, client, server):
        pid = find(client, Experiment.REDUCE, Arm.CONTROL)
        env = {"participant_id": pid, "events": [
            {"kind": "View", "at": 10 + i, "post_id": f"p{i}", "visible_ms": 1500, "event_id": f"e{i}"}
            for i in range(5)]}
        assert client.post("/v1/events", json=env).json()["stored"] == 5
        again = client.post("/v1/events", json=env).json()
        assert again["stored"] == 0 and again["duplicates"] == 5 and again["next_seq"] == 5
        assert len(server.store.events[pid]) == 5

    def test_large_envelope_in_order(self, client, server):
        pid = find(client, Experiment.INCREASE, Arm.TREATMENT)
        env = {"participant_id": pid, "events": [
            {"kind": "View", "at": 1000 - i, "post_id": f"p{i}", "visible_ms": 1200} for i in range(1000)]}
        assert client.post("/v1/events", json=env).json()["stored"] == 1000
        assert [e["post_id"] for e in server.store.events[pid]] == [f"p{i}" for i in range(1000)]

    def test_short_view_stored_not_qualifying(self, client, server):
        pid = find(client, Experiment.REDUCE, Arm.CONTROL)
        env = {"participant_id": pid, "events": [{"kind": "View", "at": 5, "post_id": "p", "visible_ms": 500}]}
        assert client.post("/v1/events", json=env).json()["stored"] == 1
        stored = server.store.events[pid][0]
        assert stored["visible_ms"] == 500
        assert not EngagementEvent.from_dict(stored).qualifying_view

    def test_negative_visible_ms_400(self, client):
        pid = find(client, Experiment.REDUCE, Arm.CONTROL)
        env = {"participant_id": pid, "events": [{"kind": "View", "at": 5, "visible_ms": -1}]}
        assert client.post("/v1/events", json=env).status_code == 400


class TestSurveyResponse:
    def _prompt(self, client):
        pid = find(client, Experiment.INCREASE, Arm.CONTROL)
        out = client.post("/v1/rerank", json={"participant_id": pid, "load_seq": 0, "posts": posts(),
                                              "fetched_at": HOUR}).json()
        s = out["survey"]
        return pid, {**s, "n_values": 1 if s["kind"] == "Thermometer" else 2}

    def test_recorded(self, client):
        pid, s = self._prompt(client)
        r = client.post("/v1/survey-response", json={"participant_id": pid, "prompt_id": s["prompt_id"],
                                                     "values": [60] * s["n_values"], "answered_at": HOUR + 9})
        assert r.status_code == 200 and r.json()["status"] == "recorded"

    def test_out_of_range_400(self, client):
        pid, s = self._prompt(client)
        r = client.post("/v1/survey-response", json={"participant_id": pid, "prompt_id": s["prompt_id"],
                                                     "values": [101] * s["n_values"], "answered_at": HOUR + 9})
        assert r.status_code == 400

    def test_expired_410(self, client):
        pid, s = self._prompt(client)
        r = client.post("/v1/survey-response", json={"participant_id": pid, "prompt_id": s["prompt_id"],
                                                     "values": [5] * s["n_values"], "answered_at": 5 * HOUR})
        assert r.status_code == 410

    def test_unknown_prompt_404(self, client):
        pid, _ = self._prompt(client)
        r = client.post("/v1/survey-response", json={"participant_id": pid, "prompt_id": "zzz", "values": [5]})
        assert r.status_code == 404


class TestMisc:
    def test_assignment(self, client):
        a = enroll(client, "abc")
        assert client.get("/v1/assignment/abc").json() == a
        assert client.get("/v1/assignment/nobody").status_code == 404

    def test_report_finished_run(self, client, small_bundle):
        r = client.get(f"/v1/report/{small_bundle.name}")
        assert r.status_code == 200
        tables = r.json()["tables"]
        assert tables["infeed_effects"] == (small_bundle / "tables" / "infeed_effects.csv").read_text()
        assert client.get("/v1/report/nope").status_code == 404

    def test_report_live(self, client):
        find(client, Experiment.REDUCE, Arm.CONTROL)
        r = client.get("/v1/report/live")
        assert r.status_code == 200 and "assignments" in r.json()["tables"]

    def test_bearer_token(self, server):
        c = TestClient(create_app(server, token="s3cret"))
        assert c.get("/v1/assignment/x").status_code == 401
        assert c.get("/v1/assignment/x", headers={"Authorization": "Bearer s3cret"}).status_code == 404
        assert c.get("/v1/health").status_code == 200
