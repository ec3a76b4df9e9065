import math
import tempfile
from pathlib import Path

from django.test import SimpleTestCase

from apps.experiments.scenario import load_scenario, parse_scenario
from apps.utils.exceptions import ScenarioError
from tests.factories import make_scenario, scenario_text

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


class ScenarioParsingTests(SimpleTestCase):
    def test_resolves_defaults(self):
        scenario = make_scenario()
        self.assertAlmostEqual(scenario.wavelength, 0.03)
        self.assertAlmostEqual(scenario.cfg_bs.spacing_x, 0.015)
        self.assertEqual((scenario.cfg_bs.size, scenario.cfg_irs.size), (9, 3))
        self.assertEqual(scenario.label_size, 36)
        self.assertEqual(scenario.pilot_slots, 6)
        self.assertEqual(scenario.classical_pilot_slots, 36)
        self.assertEqual(scenario.n_samples, 100)
        self.assertEqual(scenario.regions[0].scatter_range_irs, (15.0, 30.0))
        self.assertAlmostEqual(scenario.link.azimuth_ba, math.pi / 4)

    def test_explicit_pilot_lengths(self):
        scenario = make_scenario(pilot_slots=8, classical_pilot_slots=12)
        self.assertEqual(scenario.pilot_slots, 8)
        self.assertEqual(scenario.classical_pilot_slots, 12)

    def test_manifest_hash_tracks_resolved_values(self):
        first, second = make_scenario(), make_scenario()
        self.assertEqual(first.manifest_hash, second.manifest_hash)
        self.assertNotEqual(first.manifest_hash, make_scenario(seed=12).manifest_hash)
        # defaults and their explicit spelling resolve to the same scenario
        explicit = make_scenario(bs_spacing_x_m=0.015, pilot_slots=6)
        self.assertEqual(first.canonical_text(), explicit.canonical_text())

    def test_canonical_text_round_trip(self):
        scenario = make_scenario()
        again = parse_scenario(scenario.canonical_text())
        self.assertEqual(again.manifest_hash, scenario.manifest_hash)

    def test_overrides(self):
        scenario = make_scenario().with_overrides(
            seed=5, mode="ff", snr_grid_db=[-5.0, 0.0], labels=None
        )
        self.assertEqual(scenario.seed, 5)
        self.assertTrue(scenario.far_field)
        self.assertEqual(scenario.snr_grid, (-5.0, 0.0))
        with self.assertRaises(ScenarioError):
            make_scenario().with_overrides(colour="blue")

    def test_comments_and_blank_lines(self):
        text = "# header\n\n" + scenario_text().replace("seed = 11", "seed = 11  # s")
        self.assertEqual(parse_scenario(text).seed, 11)


class ScenarioValidationTests(SimpleTestCase):
    def assertInvalid(self, text):
        with self.assertRaises(ScenarioError):
            parse_scenario(text)

    def test_unknown_key(self):
        self.assertInvalid(scenario_text(region3_bs_range_m=10))

    def test_missing_key(self):
        self.assertInvalid(scenario_text(drop=("seed",)))

    def test_duplicate_key(self):
        self.assertInvalid(scenario_text() + "seed = 12\n")

    def test_malformed_line(self):
        self.assertInvalid(scenario_text() + "just words\n")

    def test_bad_values(self):
        for overrides in (
            {"mode": "mid"},
            {"labels": "noisy"},
            {"sensing": "random"},
            {"rayleigh_guard": "maybe"},
            {"irs_count_x": 4},
            {"carrier_frequency_hz": 0},
            {"samples_per_user": 0},
            {"users_per_region": 0},
            {"pilot_slots": 0},
            {"snr_grid_db": "nan"},
            {"region1_azimuth_deg": "60,0"},
            {"region1_azimuth_deg": "0,30,60"},
            {"region1_elevation_deg": "0,90"},
            {"link_scatter_elevation_deg": "0,90"},
            {"link_range_m": -1},
            {"regions": 0},
        ):
            with self.subTest(**overrides):
                self.assertInvalid(scenario_text(**overrides))

    def test_empty_snr_grid(self):
        self.assertInvalid(scenario_text(snr_grid_db=""))

    def test_rayleigh_guard_error(self):
        with self.assertRaises(ScenarioError) as caught:
            make_scenario(rayleigh_guard="error")
        self.assertIn("region1", caught.exception.diagnostics)

    def test_rayleigh_guard_warn(self):
        with self.assertLogs("apps.experiments.scenario", level="WARNING"):
            make_scenario(rayleigh_guard="warn")

    def test_far_field_skips_guard(self):
        self.assertTrue(make_scenario(rayleigh_guard="error", mode="ff").far_field)


class BundledScenarioTests(SimpleTestCase):
    def test_desk_scenarios_load(self):
        near = load_scenario(SCENARIOS / "desk_nf.scenario")
        far = load_scenario(SCENARIOS / "desk_ff.scenario")
        self.assertEqual(near.n_regions, 3)
        self.assertEqual(near.pilot_slots, 15)
        self.assertEqual(near.classical_pilot_slots, 90)
        self.assertTrue(far.far_field)

    def test_full_scale_geometry_is_near_field(self):
        scenario = load_scenario(SCENARIOS / "full_nf.scenario")
        self.assertEqual(scenario.cfg_irs.size, 123)
        self.assertEqual(scenario.rayleigh_guard, "error")

    def test_missing_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(ScenarioError):
                load_scenario(Path(tmp) / "absent.scenario")
