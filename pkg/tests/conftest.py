import cmath
import math
import sys
from pathlib import Path

import hypothesis.strategies as st
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from wgqed.dicke_core import CouplingParams, DriveParams, EmitterParams  # noqa: E402
from wgqed.system import EmitterPairConfig, pair_config  # noqa: E402
from wgqed.waveguide_green import Waveguide1D  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

rates = st.floats(0.2, 3.0)
fractions = st.floats(0.0, 1.0)
dephasing = st.floats(0.0, 1.0)
phases = st.floats(0.0, 2 * math.pi)


@st.composite
def emitters(draw):
    return EmitterParams(gamma0=draw(rates), beta=draw(fractions), gamma_deph=draw(dephasing),
                         position_z=draw(st.floats(0.0, 3.0)))


@st.composite
def drives(draw):
    def amp():
        return draw(st.floats(0.0, 2.0)) * cmath.exp(1j * draw(phases))
    return DriveParams(amp(), amp(), draw(st.floats(-5.0, 5.0)), "RF")


@st.composite
def pair_configs(draw):
    """Any physically valid pair: arbitrary J12, |Gamma12| <= sqrt(G1 G2), free-space drive."""
    e1, e2 = draw(emitters()), draw(emitters())
    cap = math.sqrt(e1.gamma0 * e2.gamma0)
    coupling = CouplingParams(draw(st.floats(-2.0, 2.0)), draw(st.floats(-1.0, 1.0)) * cap)
    return EmitterPairConfig((e1, e2), draw(drives()), coupling, Waveguide1D())


@st.composite
def waveguide_pairs(draw, rabi=None):
    """Pairs on a waveguide with analytic couplings and a locked guided drive."""
    return pair_config(draw(phases), beta=draw(fractions), gamma_deph=draw(st.floats(0.0, 0.5)),
                       rabi=draw(st.floats(1e-4, 0.5)) if rabi is None else rabi,
                       detuning=draw(st.floats(-3.0, 3.0)), mode=draw(st.sampled_from(["RT", "RR", "RF"])))


@pytest.fixture
def tmp_out(tmp_path):
    return tmp_path / "out"


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.VERDICTS, key=lambda s: int(s.split()[1])):
        terminalreporter.write_line(line)
