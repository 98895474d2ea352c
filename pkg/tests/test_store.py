import json

import pytest

from feedlab.store import STREAMS, Store, canonical


class TestMemory:
    def test_no_root_keeps_records(self):
        s = Store()
        s.append("feeds", {"a": 1})
        s.append_events("p1", [{"k": 1}, {"k": 2}])
        assert s.streams["feeds"] == [{"a": 1}]
        assert s.all_events() == [{"k": 1}, {"k": 2}]
        assert s.sizes() == {}

    def test_unsafe_participant_id(self):
        with pytest.raises(ValueError):
            Store().append_events("../etc", [{}])


class TestFiles:
    def test_round_trip(self, tmp_path):
        with Store(tmp_path) as s:
            for i in range(3):
                s.append("responses", {"i": i, "z": "ü"})
            s.append_events("p1", [{"seq": 0}, {"seq": 1}])
        r = Store.open(tmp_path)
        assert r.streams["responses"] == [{"i": 0, "z": "ü"}, {"i": 1, "z": "ü"}, {"i": 2, "z": "ü"}]
        assert r.events == {"p1": [{"seq": 0}, {"seq": 1}]}
        assert set(r.streams) == set(STREAMS)

    def test_canonical_lines(self, tmp_path):
        with Store(tmp_path) as s:
            s.append("feeds", {"b": 2, "a": 1})
        assert (tmp_path / "feeds.jsonl").read_text() == canonical({"a": 1, "b": 2}) + "\n"

    def test_torn_line_dropped_then_appendable(self, tmp_path):
        with Store(tmp_path) as s:
            s.append("feeds", {"i": 0})
        with open(tmp_path / "feeds.jsonl", "a") as fh:
            fh.write('{"i": 1, "par')
        r = Store.open(tmp_path)
        assert r.streams["feeds"] == [{"i": 0}]
        r.append("feeds", {"i": 2})
        r.close()
        assert Store.open(tmp_path).streams["feeds"] == [{"i": 0}, {"i": 2}]

    def test_corruption_in_middle_raises(self, tmp_path):
        (tmp_path / "events").mkdir()
        (tmp_path / "feeds.jsonl").write_text('{"i": 0}\nnot json\n{"i": 2}\n')
        with pytest.raises(json.JSONDecodeError):
            Store.open(tmp_path)

    def test_truncate_to_checkpoint(self, tmp_path):
        s = Store(tmp_path)
        s.append("feeds", {"i": 0})
        s.append_events("p1", [{"e": 0}])
        sizes = s.sizes()
        s.append("feeds", {"i": 1})
        s.append_events("p1", [{"e": 1}])
        s.append_events("p2", [{"e": 0}])
        s.append("surveys", {"x": 1})
        s.close()
        Store.truncate(tmp_path, sizes)
        r = Store.open(tmp_path)
        assert r.streams["feeds"] == [{"i": 0}]
        assert r.streams["surveys"] == []
        assert r.events == {"p1": [{"e": 0}]}

    def test_write_json_atomic(self, tmp_path):
        s = Store(tmp_path)
        s.write_json("progress.json", {"a": 1})
        s.write_json("progress.json", {"a": 2})
        assert s.read_json("progress.json") == {"a": 2}
        assert not list(tmp_path.glob("*.tmp"))
        assert s.read_json("missing.json", default=7) == 7
