#!/usr/bin/env python3
"""Regenerate the bundled study datasets under data/.

The five public source datasets cannot be redistributed here, so the bundle
ships synthetic facsimiles instead: each generator below reproduces the
column structure of its public counterpart and plants the documented bias
mechanism (group-dependent label corruption plus proxy columns correlated
with the protected characteristic). Everything is seeded, so rerunning this
script reproduces data/ byte for byte. A MANIFEST.json records the real
source URLs next to the checksums of the bundled files.
"""

from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from fairprep.ioutil import write_json  # noqa: E402
from fairprep.mlcore import derive_rng, sigmoid  # noqa: E402
from fairprep.tabular import ColumnSpec, DataTable, save_schema, write_csv  # noqa: E402

DATA_DIR = ROOT / "data"
GENERATOR_SEED = 20240901


def _clip(v, lo, hi):
    return np.clip(v, lo, hi)


# ---------------------------------------------------------------------------
# criminal recidivism (facsimile of the ProPublica two-year recidivism data)


def make_compas(n=1500):
    rng = derive_rng(GENERATOR_SEED, "compas")
    races = np.array(["African-American", "Caucasian", "Hispanic", "Other"])
    race = races[rng.choice(4, size=n, p=[0.51, 0.34, 0.10, 0.05])]
    aa = (race == "African-American").astype(float)
    male = (rng.random(n) < 0.81).astype(float)

    risk = rng.standard_normal(n)
    # arrest-history columns carry the racial over-policing signal on top of risk
    age = _clip(18 + rng.gamma(2.2, 6.5, size=n) - 2.5 * aa, 18, 80).round()
    priors = rng.poisson(np.exp(_clip(-0.2 + 0.55 * risk + 0.55 * aa, -4, 3)))
    juv_fel = rng.poisson(np.exp(_clip(-2.0 + 0.40 * risk + 0.40 * aa, -5, 2)))
    juv_misd = rng.poisson(np.exp(_clip(-1.7 + 0.35 * risk + 0.35 * aa, -5, 2)))
    charge = np.where(rng.random(n) < sigmoid(-0.2 + 0.3 * risk), "F", "M")

    age_z = -(age - 32.0) / 9.0
    y_fair = (rng.random(n) < sigmoid(-0.45 + 1.3 * risk + 0.5 * age_z + 0.15 * male)).astype(int)
    y = y_fair.copy()
    flip = (aa == 1) & (y_fair == 0) & (rng.random(n) < 0.12)
    y[flip] = 1

    schema = [
        ColumnSpec("id", "numeric", "drop"),
        ColumnSpec("sex", "categorical", "feature", ("Female", "Male")),
        ColumnSpec("age", "numeric", "feature"),
        ColumnSpec("race", "categorical", "protected",
                   ("African-American", "Caucasian", "Hispanic", "Other")),
        ColumnSpec("juv_fel_count", "numeric", "feature"),
        ColumnSpec("juv_misd_count", "numeric", "feature"),
        ColumnSpec("priors_count", "numeric", "feature"),
        ColumnSpec("c_charge_degree", "categorical", "feature", ("F", "M")),
        ColumnSpec("two_year_recid", "binary", "target"),
    ]
    cols = {
        "id": [float(i) for i in range(1, n + 1)],
        "sex": ["Male" if m else "Female" for m in male],
        "age": [float(v) for v in age],
        "race": list(race),
        "juv_fel_count": [float(v) for v in juv_fel],
        "juv_misd_count": [float(v) for v in juv_misd],
        "priors_count": [float(v) for v in priors],
        "c_charge_degree": list(charge),
        "two_year_recid": [int(v) for v in y],
    }
    return DataTable(schema, cols)


# ---------------------------------------------------------------------------
# absenteeism at work (facsimile of the UCI courier-company HR data)


def make_absenteeism(n=740):
    rng = derive_rng(GENERATOR_SEED, "absenteeism")
    age = _clip(22 + rng.gamma(2.6, 5.2, size=n), 22, 58).round()
    old = (age > 45).astype(float)
    young = (age < 35).astype(float)
    habit = rng.standard_normal(n)  # latent absence propensity

    service_time = _clip((age - 20) * 0.52 + rng.normal(0, 2.2, n), 1, 29).round()
    bmi = _clip(25.5 + 0.11 * (age - 40) + rng.normal(0, 2.6, n), 18, 38).round(1)
    transport = _clip(220 + 65 * rng.standard_normal(n), 90, 390).round()
    distance = _clip(29 + 14 * rng.standard_normal(n), 5, 52).round()
    workload = _clip(270 + 36 * rng.standard_normal(n), 200, 380).round()
    kids = rng.poisson(0.95, n)
    pets = rng.poisson(0.75, n)
    education = 1 + rng.choice(4, size=n, p=[0.81, 0.09, 0.06, 0.04])
    drinker = (rng.random(n) < 0.45 + 0.1 * (habit > 0)).astype(int)
    smoker = (rng.random(n) < 0.07).astype(int)
    hit_target = _clip(93 + 3.2 * rng.standard_normal(n) - 1.2 * habit, 81, 100).round()
    disciplinary = (rng.random(n) < 0.045).astype(int)

    # recorded absence hours: propensity plus an age-dependent recording bump
    hours = np.exp(1.15 + 0.85 * habit + 0.85 * old - 0.25 * young + rng.normal(0, 0.35, n))
    hours = _clip(hours, 0, 120).round()

    schema = [
        ColumnSpec("employee_id", "numeric", "drop"),
        ColumnSpec("transportation_expense", "numeric", "feature"),
        ColumnSpec("distance_to_work", "numeric", "feature"),
        ColumnSpec("service_time", "numeric", "feature"),
        ColumnSpec("age", "numeric", "protected"),
        ColumnSpec("work_load_average", "numeric", "feature"),
        ColumnSpec("hit_target", "numeric", "feature"),
        ColumnSpec("disciplinary_failure", "binary", "feature"),
        ColumnSpec("education", "numeric", "feature"),
        ColumnSpec("son", "numeric", "feature"),
        ColumnSpec("social_drinker", "binary", "feature"),
        ColumnSpec("social_smoker", "binary", "feature"),
        ColumnSpec("pet", "numeric", "feature"),
        ColumnSpec("body_mass_index", "numeric", "feature"),
        ColumnSpec("absenteeism_hours", "numeric", "target"),
    ]
    cols = {
        "employee_id": [float(i) for i in range(1, n + 1)],
        "transportation_expense": [float(v) for v in transport],
        "distance_to_work": [float(v) for v in distance],
        "service_time": [float(v) for v in service_time],
        "age": [float(v) for v in age],
        "work_load_average": [float(v) for v in workload],
        "hit_target": [float(v) for v in hit_target],
        "disciplinary_failure": [int(v) for v in disciplinary],
        "education": [float(v) for v in education],
        "son": [float(v) for v in kids],
        "social_drinker": [int(v) for v in drinker],
        "social_smoker": [int(v) for v in smoker],
        "pet": [float(v) for v in pets],
        "body_mass_index": [float(v) for v in bmi],
        "absenteeism_hours": [float(v) for v in hours],
    }
    return DataTable(schema, cols)


# ---------------------------------------------------------------------------
# heart disease (facsimile of the Cleveland clinical measurements data)


def make_heart(n=600):
    rng = derive_rng(GENERATOR_SEED, "heart")
    female = (rng.random(n) < 0.32).astype(float)
    male = 1.0 - female
    severity = rng.standard_normal(n)

    # residual sex signal: men's ischemia readings (oldpeak, exang, cp, thal,
    # ca) run sicker at equal severity, while clean channels (slope, trestbps,
    # thalach) and severity-neutral sex markers (chol, restecg) let a debiaser
    # rebuild severity without the shifted readings
    age = _clip(54 + 9 * rng.standard_normal(n) + 1.5 * severity, 29, 77).round()
    trestbps = _clip(131 + 14 * rng.standard_normal(n) + 7 * severity, 94, 200).round()
    chol = _clip(230 + 40 * rng.standard_normal(n) + 35 * female, 126, 420).round()
    thalach = _clip(153 - 0.5 * (age - 54) - 10 * severity + 11 * rng.standard_normal(n), 71, 202).round()
    oldpeak = _clip(0.8 + 0.60 * severity + 0.35 * male + 0.60 * rng.standard_normal(n), 0, 6.2).round(1)
    exang = (rng.random(n) < sigmoid(-1.0 + 0.9 * severity + 0.40 * male)).astype(int)
    ca = _clip(rng.poisson(np.exp(_clip(-1.2 + 0.55 * severity + 0.25 * male, -4, 1.4))), 0, 3)
    fbs = (rng.random(n) < 0.15).astype(int)
    cp_logit = 0.7 * severity + 0.35 * male + 0.5 * rng.standard_normal(n)
    cp = np.digitize(cp_logit, [-0.6, 0.2, 1.0])  # 0..3
    thal_logit = 0.65 * severity + 0.35 * male + 0.55 * rng.standard_normal(n)
    thal = np.digitize(thal_logit, [0.1, 0.9])  # 0=normal, 1=fixed, 2=reversible
    restecg = _clip(rng.poisson(0.40 + 0.50 * female), 0, 2)
    slope = np.digitize(0.8 * severity + 0.45 * rng.standard_normal(n), [-0.3, 0.8])

    scale = _clip(
        np.digitize(1.0 * severity + 0.75 * rng.standard_normal(n), [0.5, 1.4, 2.1]),
        0, 3,
    )
    diagnosed = scale

    schema = [
        ColumnSpec("age", "numeric", "feature"),
        ColumnSpec("sex", "categorical", "protected", ("female", "male")),
        ColumnSpec("cp", "numeric", "feature"),
        ColumnSpec("trestbps", "numeric", "feature"),
        ColumnSpec("chol", "numeric", "feature"),
        ColumnSpec("fbs", "binary", "feature"),
        ColumnSpec("restecg", "numeric", "feature"),
        ColumnSpec("thalach", "numeric", "feature"),
        ColumnSpec("exang", "binary", "feature"),
        ColumnSpec("oldpeak", "numeric", "feature"),
        ColumnSpec("slope", "numeric", "feature"),
        ColumnSpec("ca", "numeric", "feature"),
        ColumnSpec("thal", "numeric", "feature"),
        ColumnSpec("num", "numeric", "target"),
    ]
    cols = {
        "age": [float(v) for v in age],
        "sex": ["female" if f else "male" for f in female],
        "cp": [float(v) for v in cp],
        "trestbps": [float(v) for v in trestbps],
        "chol": [float(v) for v in chol],
        "fbs": [int(v) for v in fbs],
        "restecg": [float(v) for v in restecg],
        "thalach": [float(v) for v in thalach],
        "exang": [int(v) for v in exang],
        "oldpeak": [float(v) for v in oldpeak],
        "slope": [float(v) for v in slope],
        "ca": [float(v) for v in ca],
        "thal": [float(v) for v in thal],
        "num": [float(v) for v in diagnosed],
    }
    return DataTable(schema, cols)


# ---------------------------------------------------------------------------
# school economic needs (facsimile of the NYC school explorer data)


def make_passnyc(n=800):
    rng = derive_rng(GENERATOR_SEED, "passnyc")
    majority_black = (rng.random(n) < 0.24).astype(float)
    pct_black_hispanic = np.where(
        majority_black == 1,
        _clip(68 + 16 * rng.standard_normal(n), 50.5, 99),
        _clip(27 + 13 * rng.standard_normal(n), 1, 49.9),
    ).round(1)

    noise = rng.standard_normal(n)
    eni = _clip(0.42 + 0.34 * majority_black + (0.19 - 0.06 * majority_black) * noise, 0.03, 0.99)

    # features mark the majority-black flag strongly but the within-group need
    # component only faintly, so a regression leans on the group signal
    u = (eni - 0.42 - 0.34 * majority_black) / 0.19
    attendance = _clip(93.5 - 1.0 * u - 3.6 * majority_black + 1.8 * rng.standard_normal(n), 78, 99).round(1)
    chronic_absent = _clip(15 + 2.6 * u + 9.5 * majority_black + 4 * rng.standard_normal(n), 0, 55).round(1)
    ell_pct = _clip(12 + 1.8 * u + 8.5 * majority_black + 5 * rng.standard_normal(n), 0, 60).round(1)
    math_prof = _clip(3.0 - 0.16 * u - 0.55 * majority_black + 0.30 * rng.standard_normal(n), 1.4, 4.5).round(2)
    ela_prof = _clip(2.9 - 0.14 * u - 0.50 * majority_black + 0.28 * rng.standard_normal(n), 1.4, 4.5).round(2)
    trust_pct = _clip(88 - 1.1 * u - 2.2 * majority_black + 4.5 * rng.standard_normal(n), 60, 99).round(1)
    enrollment = _clip(620 + 240 * rng.standard_normal(n), 150, 1600).round()

    schema = [
        ColumnSpec("school_id", "numeric", "drop"),
        ColumnSpec("percent_black_hispanic", "numeric", "protected"),
        ColumnSpec("attendance_rate", "numeric", "feature"),
        ColumnSpec("chronic_absent_pct", "numeric", "feature"),
        ColumnSpec("ell_pct", "numeric", "feature"),
        ColumnSpec("avg_math_proficiency", "numeric", "feature"),
        ColumnSpec("avg_ela_proficiency", "numeric", "feature"),
        ColumnSpec("trust_pct", "numeric", "feature"),
        ColumnSpec("enrollment", "numeric", "feature"),
        ColumnSpec("economic_need_index", "numeric", "target"),
    ]
    cols = {
        "school_id": [float(i) for i in range(1, n + 1)],
        "percent_black_hispanic": [float(v) for v in pct_black_hispanic],
        "attendance_rate": [float(v) for v in attendance],
        "chronic_absent_pct": [float(v) for v in chronic_absent],
        "ell_pct": [float(v) for v in ell_pct],
        "avg_math_proficiency": [float(v) for v in math_prof],
        "avg_ela_proficiency": [float(v) for v in ela_prof],
        "trust_pct": [float(v) for v in trust_pct],
        "enrollment": [float(v) for v in enrollment],
        "economic_need_index": [float(round(v, 4)) for v in eni],
    }
    return DataTable(schema, cols)


# ---------------------------------------------------------------------------
# communities and crime (facsimile of the 1990-census community profiles)


def make_communities(n=1000):
    rng = derive_rng(GENERATOR_SEED, "communities")
    pct_black = _clip(rng.beta(0.65, 3.2, n), 0, 1).round(3)
    b = (pct_black - pct_black.mean()) / pct_black.std()
    dep = _clip(0.62 * b + 0.79 * rng.standard_normal(n), -3, 3)  # deprivation factor

    def social(load_dep, load_b, noise, lo=0.0, hi=1.0):
        # noisy deprivation readings with an extra race loading: the census
        # columns mark the racial composition more sharply than deprivation
        return _clip(0.5 + load_dep * dep + load_b * b + noise * rng.standard_normal(n), lo, hi).round(3)

    features = {
        "population": _clip(rng.lognormal(0.0, 0.9, n) / 20, 0, 1).round(3),
        "household_size": social(0.03, 0.07, 0.16),
        "pct_poverty": social(0.07, 0.09, 0.10),
        "median_income": social(-0.07, -0.08, 0.10),
        "pct_unemployed": social(0.06, 0.08, 0.11),
        "pct_two_parent_fam": social(-0.07, -0.11, 0.09),
        "pct_vacant_housing": social(0.05, 0.08, 0.11),
        "median_rent": social(-0.05, -0.05, 0.11),
        "pct_hs_grad": social(-0.06, -0.06, 0.11),
        "pct_college_grad": social(-0.05, -0.04, 0.11),
        "pop_density": social(0.04, 0.10, 0.12),
        "pct_recent_immig": social(0.02, 0.05, 0.12),
        "pct_large_family": social(0.04, 0.09, 0.11),
        "pct_same_house_5yr": social(-0.03, -0.04, 0.12),
        "pct_public_assist": social(0.07, 0.10, 0.10),
        "med_home_value": social(-0.05, -0.06, 0.11),
        "pct_overcrowding": social(0.05, 0.08, 0.11),
        "pct_young_adults": social(0.02, 0.03, 0.12),
        "pct_elderly": social(-0.02, -0.03, 0.12),
        "pct_urban": social(0.03, 0.09, 0.13),
    }

    # police/LEMAS columns are sparsely reported; the recipe drops them
    sparse_cols = {}
    for name in ("police_per_pop", "police_budget_pp", "pct_police_minority",
                 "police_cars_pp", "police_overtime_pp", "pct_police_patrol"):
        vals = social(0.02, 0.01, 0.15)
        mask = rng.random(n) < 0.72
        sparse_cols[name] = [None if m else float(v) for m, v in zip(mask, vals)]

    dep_pos = np.maximum(dep, 0)
    crime = _clip(
        0.16 + 0.13 * dep + 0.10 * dep_pos + 0.16 * np.maximum(b, 0) + 0.07 * rng.standard_normal(n),
        0, 1,
    ).round(3)

    other_race = {
        "race_pct_white": _clip(1 - pct_black - 0.08 * rng.random(n), 0, 1).round(3),
        "race_pct_asian": _clip(0.04 * rng.random(n), 0, 1).round(3),
        "race_pct_hisp": _clip(0.10 * rng.random(n), 0, 1).round(3),
    }

    schema = [ColumnSpec("community_id", "numeric", "drop")]
    cols = {"community_id": [float(i) for i in range(1, n + 1)]}
    schema.append(ColumnSpec("race_pct_black", "numeric", "protected"))
    cols["race_pct_black"] = [float(v) for v in pct_black]
    for name in other_race:
        schema.append(ColumnSpec(name, "numeric", "drop"))
        cols[name] = [float(v) for v in other_race[name]]
    for name, vals in features.items():
        schema.append(ColumnSpec(name, "numeric", "feature"))
        cols[name] = [float(v) for v in vals]
    for name, vals in sparse_cols.items():
        schema.append(ColumnSpec(name, "numeric", "feature"))
        cols[name] = vals
    schema.append(ColumnSpec("violent_crimes_per_pop", "numeric", "target"))
    cols["violent_crimes_per_pop"] = [float(v) for v in crime]
    return DataTable(schema, cols)


# ---------------------------------------------------------------------------


STUDIES = {
    "compas": (
        make_compas,
        "https://github.com/propublica/compas-analysis",
        "compas-scores-two-years.csv",
    ),
    "absenteeism": (
        make_absenteeism,
        "https://archive.ics.uci.edu/ml/datasets/Absenteeism+at+work",
        "Absenteeism_at_work.csv",
    ),
    "heart": (
        make_heart,
        "https://www.kaggle.com/ronitf/heart-disease-uci",
        "heart.csv",
    ),
    "passnyc": (
        make_passnyc,
        "https://www.kaggle.com/passnyc/data-science-for-good",
        "2016 School Explorer.csv",
    ),
    "communities": (
        make_communities,
        "https://archive.ics.uci.edu/ml/datasets/Communities+and+Crime",
        "communities.data",
    ),
}


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def main() -> int:
    DATA_DIR.mkdir(exist_ok=True)
    manifest = {"generator_seed": GENERATOR_SEED, "datasets": {}}
    for name, (maker, url, filename) in STUDIES.items():
        table = maker()
        csv_path = DATA_DIR / f"{name}.csv"
        schema_path = DATA_DIR / f"{name}.schema.json"
        write_csv(table, csv_path)
        save_schema(table.schema, schema_path)
        manifest["datasets"][name] = {
            "source_url": url,
            "source_filename": filename,
            "source_sha256": None,  # upstream file not retrieved in this build
            "retrieved": None,
            "bundled_csv": csv_path.name,
            "bundled_schema": schema_path.name,
            "bundled_sha256": _sha256(csv_path),
            "rows": table.n_rows,
            "note": "synthetic facsimile generated by scripts/make_bundled_data.py",
        }
        print(f"{name}: {table.n_rows} rows -> {csv_path.name}")
    write_json(DATA_DIR / "MANIFEST.json", manifest)
    print(f"manifest -> {DATA_DIR / 'MANIFEST.json'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
