import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gamecoding.utility import UtilitySyntaxError, parse_utility


class TestEvaluation:
    @pytest.mark.parametrize(
        "text, mmse, pa, expected",
        [
            ("log(MMSE) + 0.75*log(PA)", 10.0, 0.8, np.log(10) + 0.75 * np.log(0.8)),
            ("-MMSE + 25*PA", 10.0, 0.8, 10.0),
            ("PA / sqrt(MMSE)", 4.0, 0.5, 0.25),
            ("2^3^2", 0, 0, 512.0),
            ("-2^2", 0, 0, -4.0),
            ("1 - 2 - 3", 0, 0, -4.0),
            ("8 / 4 / 2", 0, 0, 1.0),
            ("exp(0) + 1.5e1", 0, 0, 16.0),
            ("MMSE − PA", 3.0, 1.0, 2.0),
        ],
    )
    def test_values(self, text, mmse, pa, expected):
        assert float(parse_utility(text)(mmse, pa)) == pytest.approx(expected)

    def test_vectorised(self):
        f = parse_utility("MMSE * PA")
        np.testing.assert_allclose(f(np.array([1.0, 2.0]), 3.0), [3.0, 6.0])

    def test_constant_broadcasts(self):
        assert parse_utility("7")(np.zeros(4), np.zeros(4)).shape == (4,)

    def test_log_of_zero_is_not_an_exception(self):
        assert parse_utility("log(PA)")(1.0, 0.0) == -np.inf


class TestErrors:
    @pytest.mark.parametrize(
        "text, offset",
        [
            ("MMSE + )", 7),
            ("foo(MMSE)", 0),
            ("log(1, 2)", 5),
            ("log MMSE", 4),
            ("MMSE +", 6),
            ("(MMSE", 5),
            ("MMSE $ PA", 5),
            ("MMSE PA", 5),
        ],
    )
    def test_reports_offset(self, text, offset):
        with pytest.raises(UtilitySyntaxError) as info:
            parse_utility(text)
        assert info.value.position == offset
        assert f"offset {offset}" in str(info.value)

    def test_non_string(self):
        with pytest.raises(UtilitySyntaxError):
            parse_utility(3)


@st.composite
def expressions(draw, depth=3):
    if depth == 0 or draw(st.booleans()):
        return draw(st.sampled_from(["MMSE", "PA", "2", "0.5", "3.25"]))
    kind = draw(st.sampled_from(["bin", "neg", "func", "paren"]))
    if kind == "bin":
        op = draw(st.sampled_from(["+", "-", "*", "/"]))
        return f"{draw(expressions(depth - 1))} {op} {draw(expressions(depth - 1))}"
    if kind == "neg":
        return f"-{draw(expressions(depth - 1))}"
    if kind == "func":
        return f"{draw(st.sampled_from(['log', 'sqrt', 'exp']))}({draw(expressions(depth - 1))})"
    return f"({draw(expressions(depth - 1))})"


class TestRoundTrip:
    @settings(max_examples=150, deadline=None)
    @given(expressions())
    def test_printed_form_reparses_to_same_values(self, text):
        a = parse_utility(text)
        b = parse_utility(str(a))
        m = np.array([0.3, 1.0, 7.5])
        p = np.array([0.1, 0.5, 0.9])
        np.testing.assert_allclose(a(m, p), b(m, p), rtol=1e-14, equal_nan=True)
