import numpy as np
import pytest

from railscope.dut_synth import (
    FrameDirection,
    FrameSchedule,
    GroundOffsetSpec,
    RailWaveformSpec,
    Scenario,
    TriggerMode,
    TriggerSpec,
    eval_rail,
    eval_rail_array,
    frame_duration,
    frame_event_times,
    load_scenario,
    save_scenario,
    trigger_time,
    visual_servoing_scenario,
)
from railscope.rail_model import RailConfig

from conftest import two_rail_scenario


def ingress(count, burst=0.02, first=1e-3, period=1e-3, rail_id=1):
    return FrameSchedule(
        rail_id=rail_id,
        direction=FrameDirection.INGRESS,
        frame_bytes=1518,
        period_s=period,
        count=count,
        first_arrival_s=first,
        burst_current_a=burst,
    )


class TestFrameDuration:
    def test_full_size_gigabit(self):
        assert frame_duration(1518, 1e9) == pytest.approx(12.304e-6)

    def test_min_size_gigabit(self):
        assert frame_duration(64, 1e9) == pytest.approx(0.672e-6)

    def test_linear_in_rate(self):
        assert frame_duration(1518, 2e9) == pytest.approx(6.152e-6)

    @pytest.mark.parametrize("size", [63, 1519, 0])
    def test_rejects_non_ethernet_sizes(self, size):
        with pytest.raises(ValueError):
            frame_duration(size, 1e9)

    def test_rejects_bad_rate(self):
        with pytest.raises(ValueError):
            frame_duration(1518, 0)


class TestFrameEventTimes:
    def test_empty(self):
        assert frame_event_times(ingress(0)) == []

    def test_arithmetic_progression(self):
        events = frame_event_times(ingress(3))
        starts = [s for s, _ in events]
        assert starts == pytest.approx([1e-3, 2e-3, 3e-3])
        for s, e in events:
            assert e - s == pytest.approx(12.304e-6)

    def test_thousand_frames_fit_duration(self):
        events = frame_event_times(ingress(1000))
        assert len(events) == 1000
        assert all(0 <= s < e <= 2.0 for s, e in events)

    def test_period_must_exceed_duration(self):
        with pytest.raises(ValueError):
            ingress(1, period=10e-6)


class TestTriggerTime:
    def test_at_time(self):
        sc = two_rail_scenario(trigger=TriggerSpec(TriggerMode.AT_TIME, t_s=0.5))
        assert trigger_time(sc) == 0.5

    def test_after_first_frame(self):
        sc = two_rail_scenario(
            trigger=TriggerSpec(TriggerMode.AFTER_N_FRAMES, n=1),
            schedules=[ingress(5)],
        )
        assert trigger_time(sc) == pytest.approx(1e-3 + 12.304e-6)

    def test_after_thousand_frames(self):
        sc = two_rail_scenario(
            duration_s=2.0,
            trigger=TriggerSpec(TriggerMode.AFTER_N_FRAMES, n=1000),
            schedules=[ingress(1000)],
        )
        assert trigger_time(sc) == pytest.approx(1.0 + 12.304e-6)

    def test_n_exceeding_count_rejected(self):
        sc = two_rail_scenario(
            trigger=TriggerSpec(TriggerMode.AFTER_N_FRAMES, n=10),
            schedules=[ingress(5)],
        )
        with pytest.raises(ValueError):
            trigger_time(sc)


class TestEvalRail:
    def test_baseline_only(self):
        sc = two_rail_scenario()
        v, i = eval_rail(sc, 0, 0.123)
        assert (v, i) == (1.0, 0.2)

    def test_ripple_superposition(self):
        sc = two_rail_scenario(ripple_amp_a=0.01)
        t_peak = 1.0 / (4 * sc.ripple_hz)  # sin term = 1
        _, i = eval_rail(sc, 0, t_peak)
        assert i == pytest.approx(0.21, rel=1e-9)

    def test_frame_burst_adds(self):
        sc = two_rail_scenario(schedules=[ingress(3, burst=0.05)])
        _, i = eval_rail(sc, 1, 2e-3 + 5e-6)  # inside second frame
        assert i == pytest.approx(0.05 + 0.05)
        _, i_gap = eval_rail(sc, 1, 2e-3 + 100e-6)
        assert i_gap == pytest.approx(0.05)

    def test_phases(self):
        sc = two_rail_scenario()
        wf = RailWaveformSpec(0, 1.0, 0.2, phases=((0.1, 0.2, 0.3),))
        sc = Scenario(
            duration_s=sc.duration_s, seed=sc.seed, adc=sc.adc, rails=sc.rails,
            waveforms=(wf, sc.waveforms[1]), trigger=sc.trigger,
        )
        assert eval_rail(sc, 0, 0.15)[1] == pytest.approx(0.5)
        assert eval_rail(sc, 0, 0.25)[1] == pytest.approx(0.2)

    def test_deterministic_bit_identical(self):
        sc = two_rail_scenario(noise_rms_a=1e-4, ripple_amp_a=1e-3)
        t = np.linspace(0, 0.5, 1001)
        v1, i1 = eval_rail_array(sc, 0, t)
        v2, i2 = eval_rail_array(sc, 0, t)
        assert np.array_equal(v1, v2) and np.array_equal(i1, i2)
        # overlapping ranges agree pointwise too
        _, i3 = eval_rail_array(sc, 0, t[500:])
        assert np.array_equal(i1[500:], i3)

    def test_noise_scale(self):
        sc = two_rail_scenario(noise_rms_a=1e-3)
        t = np.arange(100_000) / 225_000
        _, i = eval_rail_array(sc, 0, t)
        assert np.std(i - 0.2) == pytest.approx(1e-3, rel=0.02)

    def test_egress_invisibility(self):
        silent = ingress(100, burst=0.0)
        sc_with = two_rail_scenario(schedules=[silent], noise_rms_a=1e-4)
        sc_without = two_rail_scenario(schedules=[], noise_rms_a=1e-4)
        t = np.linspace(0, 0.5, 50_001)
        for rail_id in (0, 1):
            va, ia = eval_rail_array(sc_with, rail_id, t)
            vb, ib = eval_rail_array(sc_without, rail_id, t)
            assert np.array_equal(va, vb) and np.array_equal(ia, ib)

    def test_unknown_rail(self):
        with pytest.raises(KeyError):
            eval_rail(two_rail_scenario(), 5, 0.1)

    def test_t_outside_duration(self):
        with pytest.raises(ValueError):
            eval_rail(two_rail_scenario(duration_s=0.5), 0, 0.6)

    def test_ground_offset_applies_to_marked_rails(self):
        rails = (RailConfig(0, "core", 0.1, 50.0, 0, 1),)
        wf = RailWaveformSpec(0, 1.0, 0.1, ground_referenced=True)
        sc = Scenario(
            duration_s=1.0, seed=1, rails=rails, waveforms=(wf,),
            ground_offset=GroundOffsetSpec(
                r_ground_ohms=0.05, activity=((0.2, 0.4, 0.5),)
            ),
        )
        assert eval_rail(sc, 0, 0.3)[0] == pytest.approx(1.0 + 0.05 * 0.5)
        assert eval_rail(sc, 0, 0.5)[0] == pytest.approx(1.0)


class TestScenarioDocument:
    def test_json_round_trip(self, tmp_path):
        sc = visual_servoing_scenario(seed=99)
        path = tmp_path / "scenario.json"
        save_scenario(sc, path)
        assert load_scenario(path) == sc

    def test_overlapping_phases_rejected(self):
        with pytest.raises(ValueError, match="overlap"):
            RailWaveformSpec(0, 1.0, 0.1, phases=((0.0, 0.2, 0.1), (0.1, 0.3, 0.1)))

    def test_unknown_rail_reference_rejected(self):
        rails = (RailConfig(0, "core", 0.1, 50.0, 0, 1),)
        wf = RailWaveformSpec(0, 1.0, 0.1)
        with pytest.raises(ValueError, match="unknown rail"):
            Scenario(
                duration_s=1.0, seed=1, rails=rails, waveforms=(wf,),
                frame_schedules=(ingress(1, rail_id=9),),
            )

    def test_nonpositive_duration_rejected(self):
        with pytest.raises(ValueError):
            Scenario(duration_s=0.0, seed=1)


def test_visual_servoing_preset_shape():
    sc = visual_servoing_scenario()
    assert sc.duration_s == 2.0
    assert len(sc.rails) == 9
    assert sc.frame_schedules[0].count == 1000
    assert sc.frame_schedules[0].direction is FrameDirection.INGRESS
    assert sc.frame_schedules[1].burst_current_a == 0.0
    assert trigger_time(sc) == pytest.approx(1.0 + 12.304e-6)
