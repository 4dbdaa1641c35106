from toolloop.rl.rewards import (
    normalized_match,
    reward_deepsearch,
    reward_match,
    reward_math,
    reward_swe,
    reward_visual_reasoner,
)


def test_match_exact():
    assert reward_match("Walker Smith Jr.", "Walker Smith Jr.") == 1.0
    assert reward_match("a", "b") == -1.0


def test_match_normalizes_whitespace():
    assert reward_match(" 563.9 ", "563.9") == 1.0
    assert reward_match("a  b\nc", "a b c") == 1.0


def test_match_custom_matcher():
    ci = lambda a, b: a.lower() == b.lower()
    assert reward_match("YES", "yes", matcher=ci) == 1.0
    assert reward_match("YES", "yes") == -1.0


def test_normalized_match_is_symmetric():
    assert normalized_match("x  y", "x y") and normalized_match("x y", "x  y")


def test_math_reward():
    assert reward_math("42", "42") == 1.0
    assert reward_math("41", "42") == -1.25
    # penalty applies on mismatch regardless of anything else
    assert reward_math("", "42") == -1.25


def test_deepsearch_reward():
    assert reward_deepsearch("x", "x", tool_called=True) == 1.1
    assert reward_deepsearch("x", "x", tool_called=False) == 1.0
    assert reward_deepsearch("x", "y", tool_called=True) == -0.9
    assert reward_deepsearch("x", "y", tool_called=False) == -1.0


def test_visual_reasoner_curiosity_boundary():
    # rapr at the threshold: curiosity term vanishes
    assert reward_visual_reasoner(0.7, True, 0.3, 1) == 0.7


def test_visual_reasoner_curiosity_paid_only_when_invoked():
    assert reward_visual_reasoner(1.0, True, 0.1, 1) == 1.1
    assert reward_visual_reasoner(1.0, False, 0.1, 1) == 1.0


def test_visual_reasoner_overuse_penalty():
    # two invocations beyond the allowance cost 0.05 each
    assert reward_visual_reasoner(1.0, True, 0.1, 3) == 1.0
    assert reward_visual_reasoner(0.0, False, 0.5, 2) == -0.05


def test_swe_reward():
    assert reward_swe(True, True) == 1.0
    assert reward_swe(True, False) == 0.0
    assert reward_swe(False, True) == 0.0
    assert reward_swe(False, False) == 0.0
