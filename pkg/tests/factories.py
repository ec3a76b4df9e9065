"""Small scenarios that generate, train and evaluate in seconds."""

from pathlib import Path

from apps.experiments.scenario import parse_scenario

BASE_ENTRIES = {
    "mode": "nf",
    "seed": "11",
    "carrier_frequency_hz": "10e9",
    "bs_count_x": "3",
    "bs_count_z": "3",
    "irs_count_x": "3",
    "irs_count_z": "1",
    "link_azimuth_deg": "45",
    "link_elevation_deg": "45",
    "link_range_m": "160",
    "link_scatterers": "2",
    "regions": "2",
    "region1_azimuth_deg": "0,60",
    "region1_elevation_deg": "45,90",
    "region1_bs_range_m": "145",
    "region1_irs_range_m": "20",
    "region1_bs_scatterers": "1",
    "region1_irs_scatterers": "1",
    "region2_azimuth_deg": "120,180",
    "region2_elevation_deg": "45,90",
    "region2_bs_range_m": "155",
    "region2_irs_range_m": "30",
    "region2_bs_scatterers": "1",
    "region2_irs_scatterers": "1",
    "pilot_slots": "auto",
    "classical_pilot_slots": "auto",
    "snr_grid_db": "0,10",
    "samples_per_user": "25",
    "users_per_region": "2",
    "labels": "truth",
    "sensing": "shared",
    "rayleigh_guard": "off",
}


def scenario_text(drop=(), **overrides):
    entries = {k: v for k, v in BASE_ENTRIES.items() if k not in drop}
    entries.update({key: str(value) for key, value in overrides.items()})
    return "".join(f"{key} = {value}\n" for key, value in entries.items())


def make_scenario(**overrides):
    return parse_scenario(scenario_text(**overrides))


def write_scenario(directory, **overrides):
    path = Path(directory) / "tiny.scenario"
    path.write_text(scenario_text(**overrides), encoding="utf-8")
    return path
