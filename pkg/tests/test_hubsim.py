import pytest
from hypothesis import given
from hypothesis import strategies as st

from umphcs import biosim, hubsim, wireproto as wp


class TestQuantize:
    MODEL = hubsim.AdcModel()

    def test_zero_volts(self):
        assert hubsim.quantize(self.MODEL, 0.0) == 0

    def test_full_scale_clamps(self):
        assert hubsim.quantize(self.MODEL, 5.0) == 1023

    def test_midpoint(self):
        assert hubsim.quantize(self.MODEL, 2.5) == 512

    def test_negative_clamps_to_zero(self):
        assert hubsim.quantize(self.MODEL, -1.0) == 0

    @given(st.floats(0.0, 5.0), st.floats(0.0, 5.0))
    def test_monotone(self, a, b):
        lo, hi = sorted((a, b))
        assert hubsim.quantize(self.MODEL, lo) <= hubsim.quantize(self.MODEL, hi)

    def test_adjacent_codes_one_lsb_apart(self):
        lsb = self.MODEL.lsb_volts
        for code in (0, 1, 511, 1022):
            assert hubsim.quantize(self.MODEL, code * lsb) == code
            assert hubsim.quantize(self.MODEL, (code + 1) * lsb) == code + 1

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            hubsim.quantize(self.MODEL, float("nan"))


def live_state(module) -> hubsim.HubState:
    state = hubsim.HubState()
    hubsim.configure(state, "safety_off")
    hubsim.configure(state, "attach", module)
    hubsim.configure(state, "safety_on")
    return state


class TestServe:
    MODEL = hubsim.AdcModel()

    def test_cutoff_blocks_sampling(self):
        state = live_state(biosim.TemperatureModule(36.6))
        hubsim.configure(state, "safety_off")
        out = hubsim.serve(state, wp.HubCommand.SAMPLE_RAW, self.MODEL)
        assert out == wp.HubError()

    def test_lm35_at_366_gives_code_74(self):
        state = live_state(biosim.TemperatureModule(36.6))
        out = hubsim.serve(state, wp.HubCommand.SAMPLE_RAW, self.MODEL)
        assert out == wp.AdcValue(74)

    def test_filtered_without_filter_channel(self):
        state = live_state(biosim.TemperatureModule(36.6))
        out = hubsim.serve(state, wp.HubCommand.SAMPLE_FILTERED, self.MODEL)
        assert out == wp.HubError()

    def test_filtered_with_cuff_module(self):
        params = biosim.CuffRunParams(map_true=100, amp_max=3, sigma=15, heart_rate_hz=1.2)
        state = live_state(biosim.CuffModule(params))
        out = hubsim.serve(state, wp.HubCommand.SAMPLE_FILTERED, self.MODEL)
        assert isinstance(out, wp.AdcValue)

    def test_no_module_refuses(self):
        state = hubsim.HubState()
        assert hubsim.serve(state, wp.HubCommand.SAMPLE_RAW, self.MODEL) == wp.HubError()

    def test_response_always_in_code_range(self):
        state = live_state(biosim.TemperatureModule(150.0))  # 1.5 V
        out = hubsim.serve(state, wp.HubCommand.SAMPLE_RAW, self.MODEL)
        assert 0 <= out.code <= 1023


class TestConfigure:
    def test_happy_path_module_swap(self):
        state = live_state(biosim.TemperatureModule(36.6))
        assert state.safety_enabled
        assert state.attached is not None

    def test_attach_while_live_rejected(self):
        state = hubsim.HubState()  # safety on by default
        with pytest.raises(hubsim.AttachWhileLive):
            hubsim.configure(state, "attach", biosim.TemperatureModule(36.6))

    def test_detach_then_sample_refuses(self):
        state = live_state(biosim.TemperatureModule(36.6))
        hubsim.configure(state, "detach")
        out = hubsim.serve(state, wp.HubCommand.SAMPLE_RAW, hubsim.AdcModel())
        assert out == wp.HubError()

    def test_unknown_action(self):
        with pytest.raises(hubsim.HubConfigError):
            hubsim.configure(hubsim.HubState(), "reboot")


class TestWireLockstep:
    def test_one_response_per_valid_command(self):
        link = wp.Link("wired")
        hub = hubsim.SensorHub(link.hub, state=live_state(biosim.TemperatureModule(36.6)))
        link.host.write(b"S" * 5 + b"zz" + b"F" * 2 + b"\x00")
        sent = hub.pump()
        assert sent == 7  # 5 raw + 2 filtered (refused but answered), junk ignored
        state = wp.DecoderState()
        outcome = wp.decode_response(link.host.read(), state)
        frames = []
        while not isinstance(outcome, wp.NeedMore):
            frames.append(outcome)
            outcome = wp.decode_response(b"", state)
        assert len(frames) == 7
        assert all(isinstance(f, wp.Complete) for f in frames)

    def test_silent_while_no_commands(self):
        link = wp.Link("wired")
        hub = hubsim.SensorHub(link.hub)
        assert hub.pump() == 0
        assert link.host.read() == b""
