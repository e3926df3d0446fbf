"""Exercise the gamearena extension module end to end.

Install and run from the repository root:

    pip install maturin
    pip install --no-build-isolation crates/python
    python3 python/smoke_test.py

Without maturin, `cargo build -p gamearena-python` and copying
`target/debug/libgamearena.so` to `gamearena$(python3-config --extension-suffix)`
next to this script works too.
"""

import csv
import math
import pathlib
import tempfile

import gamearena

KNIGHT_FORK = (
    "Nf3 e5 d4 exd4 Nxd4 Nf6 Nc3 Bc5 Nb3 a6 Be3 b5 Bxc5 Qe7 Nd4 Nc6 Nf5 Qe5 Qd2 Na5 Nd6+"
).split()

CONFIG = """
game_id = "poker"
seed = 11
max_parallel_matches = 2
fixed_clock_ms = 0
output_dir = "unused"

[options]
poker_hands = 3

[[players]]
id = "alpha"
backend = { kind = "random_legal", seed = 1 }

[[players]]
id = "beta"
backend = { kind = "random_legal", seed = 2 }

[[players]]
id = "gamma"
strategy = "cot"
backend = { kind = "random_legal", seed = 3 }
"""


def check_rules():
    board = gamearena.ChessBoard()
    assert len(board.legal_moves()) == 20
    assert board.perft(3) == 8902
    assert board.push("e2e4") == "e4"
    assert board.outcome() is None

    fork = gamearena.ChessBoard.replay(KNIGHT_FORK)
    assert fork.fen == "r1b1k2r/2pp1ppp/p2N1n2/npB1q3/8/2N5/PPPQPPPP/R3KB1R b KQkq - 8 11"

    mate = gamearena.ChessBoard.replay(["f3", "e5", "g4", "Qh4#"])
    assert mate.outcome()["winner"] == "black"

    try:
        board.push("Ke5")
    except ValueError:
        pass
    else:
        raise AssertionError("illegal move accepted")

    category, tiebreak = gamearena.poker_rank(["As", "Ks", "Qs", "Js", "Ts", "2d", "3c"])
    assert category == "straight_flush" and tiebreak == [14]

    hands = {"player_1": [2, 2, 3, 4, 5], "player_2": [2, 6, 6, 6, 1]}
    assert gamearena.dice_resolve(hands, 3, 2, "player_1") == "player_1"
    assert gamearena.dice_resolve(hands, 4, 6, "player_1") == "player_2"

    assert gamearena.password_revealed("it is Brave Falcon!", "brave-falcon")
    assert not gamearena.password_revealed("bravefalcon", "brave-falcon")
    assert gamearena.default_max_attempts("debate") == 3
    assert gamearena.default_max_attempts("chess") == 5


def check_ratings():
    table = gamearena.fit_ratings([("a", "b", 3, 1, 0)])
    gap = table["ratings"]["a"] - table["ratings"]["b"]
    assert abs(gap - 400 * math.log10(3)) < 1e-6, gap


def check_matches():
    for game in gamearena.games():
        if game == "pyjail":
            continue
        events = gamearena.play_random_match(game, 5)
        verdict = events[-1]
        assert verdict["event_kind"] == "verdict", verdict
        assert not verdict["payload"]["aborted"], verdict


def check_pipeline():
    with tempfile.TemporaryDirectory() as tmp:
        root = pathlib.Path(tmp)
        summary = gamearena.tournament(CONFIG, str(root / "runs"))
        assert summary["scheduled"] == 6 and len(summary["played"]) == 6
        again = gamearena.tournament(CONFIG, str(root / "runs"))
        assert again["played"] == [] and len(again["skipped"]) == 6

        rated = gamearena.rate(str(root / "runs"), str(root / "ratings"), resamples=20, seed=1)
        assert set(rated["tables"]["poker"]["ratings"]) == {"alpha", "beta", "gamma"}
        with open(root / "ratings" / "ratings.csv", newline="") as f:
            rows = list(csv.DictReader(f))
        assert [r["rank"] for r in rows] == ["1", "2", "3"]

        files = gamearena.report(str(root / "runs"), str(root / "report"), [("gamma", "alpha")])
        names = sorted(pathlib.Path(p).name for p in files)
        assert "cumulative.csv" in names and "deltas.csv" in names, names


if __name__ == "__main__":
    check_rules()
    check_ratings()
    check_matches()
    check_pipeline()
    print("gamearena smoke test passed")
