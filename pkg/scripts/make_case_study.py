"""Regenerate the shipped case-study corpus and its event script.

Output is deterministic: run it twice and the files are byte-identical.
"""

from __future__ import annotations

import json
import random
from datetime import datetime, timedelta, timezone
from pathlib import Path

from bewa.claims import canonical_author_id, canonical_claim_signature, metadata_content_hash
from bewa.signing import key_from_seed, public_hex, sign_claim
from bewa.timeutil import parse_time

OUT = Path(__file__).resolve().parents[1] / "src" / "bewa" / "fixtures"
SIGNER_SEED = "case-study-signer"
BASE = datetime(2024, 1, 1, tzinfo=timezone.utc)

AUTHORS = {
    "hale": ("0000-0002-1825-0097", "M. Hale", "Northfield University",
             {"replication_rate": 0.7, "citation_norm": 0.8, "years_active": 18, "total_pubs": 120, "retracted_pubs": 0,
              "editorial_roles": 2, "reviews": [{"quality": 0.8}, {"quality": 0.9}, {"quality": 0.7}]}),
    "okafor": ("0000-0001-5109-3700", "C. Okafor", "Lagos Institute of Medicine",
               {"replication_rate": 0.6, "citation_norm": 0.6, "years_active": 12, "total_pubs": 70, "retracted_pubs": 0}),
    "lindqvist": ("0000-0003-1419-2405", "E. Lindqvist", "Uppsala Centre for Cardiology",
                  {"replication_rate": 0.5, "citation_norm": 0.5, "years_active": 9, "total_pubs": 40, "retracted_pubs": 0}),
    "moreau": ("0000-0002-9079-593X", "J. Moreau", "Institut Pasteur de Lyon",
               {"replication_rate": 0.2, "citation_norm": 0.9, "years_active": 20, "total_pubs": 150, "retracted_pubs": 6}),
    "tanaka": ("0000-0001-8135-3489", "H. Tanaka", "Kyoto Behavioural Lab",
               {"replication_rate": 0.3, "citation_norm": 0.7, "years_active": 15, "total_pubs": 90, "retracted_pubs": 1}),
    "ruiz": ("0000-0002-7183-4453", "A. Ruiz", "Many Labs Consortium",
             {"replication_rate": 0.9, "citation_norm": 0.4, "years_active": 7, "total_pubs": 30, "retracted_pubs": 0}),
    "becker": ("0000-0003-0650-1112", "S. Becker", "CERN", None),
    "ivanova": ("0000-0002-4410-7786", "N. Ivanova", "Gran Sasso Laboratory", None),
    "osei": ("0000-0001-6676-4540", "K. Osei", "Accra Climate Institute",
             {"replication_rate": 0.6, "citation_norm": 0.5, "years_active": 10, "total_pubs": 55, "retracted_pubs": 0}),
    "chen": ("0000-0003-2296-1875", "L. Chen", "Shanghai Cancer Center",
             {"replication_rate": 0.8, "citation_norm": 0.7, "years_active": 14, "total_pubs": 85, "retracted_pubs": 0}),
    "novak": ("", "P. Novak", "Independent", None),
    "adeyemi": ("0000-0002-0011-4416", "T. Adeyemi", "Lagos Institute of Medicine", None),
}

VENUES = {
    "lancet": {"name": "The Lancet", "R": 0.95, "T": 0.9, "C": 0.85},
    "bmj": {"name": "BMJ", "R": 0.9, "T": 0.9, "C": 0.8},
    "psych": {"name": "Psychological Science", "R": 0.7, "T": 0.75, "C": 0.7},
    "prl": {"name": "Physical Review Letters", "R": 0.95, "T": 0.95, "C": 0.9},
    "nature": {"name": "Nature", "R": 0.9, "T": 0.85, "C": 0.95},
    "jcli": {"name": "Journal of Climate", "R": 0.85, "T": 0.85, "C": 0.75},
    "onc": {"name": "Journal of Clinical Oncology", "R": 0.9, "T": 0.9, "C": 0.85},
    "arx": {"name": "Open Preprint Review", "R": 0.5, "T": 0.6, "C": 0.5},
}

# label, form, author, day offset, concept, method, frame, venue, replication status, extra fields
CLAIMS = [
    # cardiology: a citation chain S1 -> S2 -> S3 -> S7 -> S8 with one refinement and one conflict
    ("S1", "statin(x) -> reduces(ldl_cholesterol, x)", "hale", 0, "statins", "RCT", "frequentist", "lancet", "replicated", {}),
    ("S2", "statin(x) -> reduces(cardiovascular_mortality, x)", "lindqvist", 4, "statins", "meta-analysis", "frequentist", "bmj", "replicated",
     {"links": [{"target": "S1", "kind": "Evidential", "weight": 0.7}]}),
    ("S3", "statin(x) & age(x) > 65 -> reduces(all_cause_mortality, x)", "okafor", 8, "statins", "observational", "frequentist", "bmj", "untested",
     {"links": [{"target": "S2", "kind": "Evidential", "weight": 0.6}]}),
    ("S4", "statin(x) -> increases(diabetes_risk, x)", "adeyemi", 12, "statins", "observational", "frequentist", "bmj", "mixed", {}),
    ("S5", "statin(x) -> ~increases(diabetes_risk, x)", "hale", 16, "statins", "RCT", "frequentist", "lancet", "replicated",
     {"contradicts": ["S4"]}),
    ("S6", "statin(x) & age(x) > 75 -> reduces(all_cause_mortality, x)", "okafor", 40, "statins", "RCT", "frequentist", "lancet", "untested",
     {"supersedes": "S3", "relation": "refines"}),
    ("S7", "statin(x) -> reduces(stroke_incidence, x)", "lindqvist", 20, "statins", "meta-analysis", "frequentist", "bmj", "replicated",
     {"links": [{"target": "S2", "kind": "Evidential", "weight": 0.65}]}),
    ("S8", "statin(x) & prior_stroke(x) -> reduces(recurrent_stroke, x)", "hale", 24, "statins", "RCT", "frequentist", "lancet", "untested",
     {"links": [{"target": "S7", "kind": "Evidential", "weight": 0.6}]}),
    ("S9", "pcsk9_inhibitor(x) -> reduces(ldl_cholesterol, x)", "lindqvist", 28, "lipids", "RCT", "frequentist", "lancet", "replicated", {}),
    ("S10", "pcsk9_inhibitor(x) & statin(x) -> reduces(major_cardiac_events, x)", "hale", 32, "lipids", "RCT", "frequentist", "lancet", "untested",
     {"links": [{"target": "S9", "kind": "Evidential", "weight": 0.6}]}),
    # nutrition: a conflicting pair and a retraction cascade N3 -> N4 -> N5, N6 survives through independent support
    ("N1", "moderate_red_wine(x) -> improves(cardiovascular_health, x)", "moreau", 2, "alcohol", "observational", "frequentist", "nature", "mixed", {}),
    ("N2", "moderate_alcohol(x) -> ~improves(cardiovascular_health, x)", "okafor", 6, "alcohol", "meta-analysis", "frequentist", "bmj", "replicated",
     {"contradicts": ["N1"]}),
    ("N3", "resveratrol(x) -> activates(sirt1, x)", "moreau", 10, "resveratrol", "theoretical", "none", "nature", "untested", {}),
    ("N4", "resveratrol(x) -> extends(lifespan, x) | mouse(x)", "moreau", 14, "resveratrol", "simulation", "none", "nature", "untested",
     {"links": [{"target": "N3", "kind": "Deductive", "weight": 0.8}]}),
    ("N5", "resveratrol_supplement(x) -> slows(ageing, x) | human(x)", "novak", 18, "resveratrol", "other", "none", "arx", "untested",
     {"links": [{"target": "N4", "kind": "Deductive", "weight": 0.7}]}),
    ("N6", "caloric_restriction(x) -> extends(lifespan, x) | mouse(x)", "hale", 22, "resveratrol", "RCT", "frequentist", "nature", "replicated",
     {"links": [{"target": "N4", "kind": "Deductive", "weight": 0.4}, {"target": "N7", "kind": "Evidential", "weight": 0.8}]}),
    ("N7", "caloric_restriction(x) -> reduces(igf1, x)", "chen", 3, "resveratrol", "RCT", "frequentist", "nature", "replicated", {}),
    ("N8", "mediterranean_diet(x) -> reduces(cardiac_events, x)", "lindqvist", 26, "diet", "RCT", "frequentist", "lancet", "replicated", {}),
    ("N9", "olive_oil(x) -> reduces(cardiac_events, x)", "okafor", 30, "diet", "observational", "frequentist", "bmj", "untested",
     {"links": [{"target": "N8", "kind": "Evidential", "weight": 0.55}]}),
    ("N10", "ultra_processed_food(x) -> increases(all_cause_mortality, x)", "adeyemi", 34, "diet", "observational", "frequentist", "bmj", "untested", {}),
    # psychology: failed replications contradicted by multi-lab studies
    ("P1", "ego_depletion(x) -> reduces(self_control, x)", "tanaka", 1, "ego_depletion", "RCT", "frequentist", "psych", "failed", {}),
    ("P2", "ego_depletion_effect ~= 0 | multilab", "ruiz", 5, "ego_depletion", "meta-analysis", "bayesian", "psych", "replicated",
     {"contradicts": ["P1"]}),
    ("P3", "power_pose(x) -> raises(testosterone, x)", "tanaka", 9, "power_posing", "RCT", "frequentist", "psych", "failed", {}),
    ("P4", "power_pose(x) -> ~raises(testosterone, x)", "ruiz", 13, "power_posing", "RCT", "bayesian", "psych", "replicated",
     {"contradicts": ["P3"]}),
    ("P5", "growth_mindset_intervention(x) -> improves(grades, x)", "tanaka", 17, "mindset", "RCT", "frequentist", "psych", "mixed", {}),
    ("P6", "growth_mindset_intervention(x) -> improves(grades, x) | low_achiever(x)", "ruiz", 21, "mindset", "RCT", "frequentist", "psych", "replicated",
     {"links": [{"target": "P5", "kind": "Evidential", "weight": 0.5}]}),
    ("P7", "stereotype_threat(x) -> reduces(test_score, x)", "tanaka", 25, "stereotype_threat", "observational", "frequentist", "psych", "mixed", {}),
    ("P8", "anchoring(x) -> biases(estimate, x)", "ruiz", 29, "heuristics", "RCT", "frequentist", "psych", "replicated", {}),
    ("P9", "anchoring_effect(x) -> persists(incentive, x)", "ruiz", 33, "heuristics", "RCT", "frequentist", "psych", "replicated",
     {"links": [{"target": "P8", "kind": "Evidential", "weight": 0.7}]}),
    ("P10", "facial_feedback(x) -> changes(affect, x)", "tanaka", 37, "embodiment", "RCT", "frequentist", "psych", "failed", {}),
    # physics: a superluminal result and its correction, plus independent confirmations
    ("X1", "velocity(neutrino) > c", "ivanova", 7, "neutrino_velocity", "observational", "frequentist", "prl", "failed", {}),
    ("X2", "|velocity(neutrino) - c| / c < 1e-6", "becker", 11, "neutrino_velocity", "observational", "frequentist", "prl", "replicated",
     {"contradicts": ["X1"]}),
    ("X3", "mass(higgs) in [124, 126] GeV", "becker", 15, "higgs", "observational", "frequentist", "prl", "replicated", {}),
    ("X4", "mass(higgs) = 125.1 +- 0.2 GeV", "ivanova", 19, "higgs", "observational", "frequentist", "prl", "replicated",
     {"links": [{"target": "X3", "kind": "Replicative", "weight": 0.9}]}),
    ("X5", "spin(higgs) = 0", "becker", 23, "higgs", "observational", "frequentist", "prl", "replicated",
     {"links": [{"target": "X3", "kind": "Evidential", "weight": 0.6}]}),
    ("X6", "exists(gravitational_waves) | binary_merger", "ivanova", 27, "gravitational_waves", "observational", "frequentist", "prl", "replicated", {}),
    ("X7", "speed(gravitational_waves) = c | gw170817", "becker", 31, "gravitational_waves", "observational", "frequentist", "prl", "replicated",
     {"links": [{"target": "X6", "kind": "Deductive", "weight": 0.85}]}),
    ("X8", "muon_g2_anomaly > 4 sigma", "ivanova", 35, "muon_g2", "observational", "frequentist", "prl", "mixed", {}),
    # climate: three mutually exclusive sensitivity ranges
    ("K1", "equilibrium_climate_sensitivity < 2.0 C", "novak", 36, "climate_sensitivity", "simulation", "bayesian", "arx", "untested",
     {"exclusive_set": "ecs"}),
    ("K2", "equilibrium_climate_sensitivity in [2.0, 4.5] C", "osei", 38, "climate_sensitivity", "meta-analysis", "bayesian", "jcli", "replicated",
     {"exclusive_set": "ecs"}),
    ("K3", "equilibrium_climate_sensitivity > 4.5 C", "osei", 39, "climate_sensitivity", "simulation", "bayesian", "jcli", "untested",
     {"exclusive_set": "ecs"}),
    ("K4", "arctic_sea_ice_extent(september) -> declining", "osei", 41, "cryosphere", "observational", "frequentist", "jcli", "replicated", {}),
    ("K5", "declining(arctic_sea_ice) -> amplifies(arctic_warming)", "osei", 42, "cryosphere", "simulation", "frequentist", "jcli", "untested",
     {"links": [{"target": "K4", "kind": "Evidential", "weight": 0.6}]}),
    ("K6", "amoc_strength -> declining | 1950-2020", "novak", 43, "ocean_circulation", "simulation", "frequentist", "arx", "mixed", {}),
    # oncology: a high-cost domain where only replicated, authoritative claims pass the risk gate
    ("O1", "her2_positive(x) & trastuzumab(x) -> improves(survival, x)", "chen", 44, "breast_cancer", "RCT", "frequentist", "onc", "replicated",
     {"costs": {"fp": 0.9, "fn": 0.9}}),
    ("O2", "brca1_mutation(x) -> increases(breast_cancer_risk, x)", "chen", 45, "breast_cancer", "meta-analysis", "frequentist", "onc", "replicated",
     {"costs": {"fp": 0.9, "fn": 0.9}}),
    ("O3", "parp_inhibitor(x) & brca1_mutation(x) -> improves(progression_free_survival, x)", "chen", 46, "breast_cancer", "RCT", "frequentist", "onc",
     "replicated", {"costs": {"fp": 0.9, "fn": 0.9}, "links": [{"target": "O2", "kind": "Evidential", "weight": 0.7}]}),
    ("O4", "checkpoint_inhibitor(x) & high_tmb(x) -> improves(response, x)", "chen", 47, "immunotherapy", "RCT", "frequentist", "onc", "replicated",
     {"costs": {"fp": 0.9, "fn": 0.9}}),
    ("O5", "ctdna_clearance(x) -> predicts(recurrence_free, x)", "okafor", 48, "immunotherapy", "observational", "frequentist", "onc", "replicated",
     {"costs": {"fp": 0.9, "fn": 0.9}}),
    ("O6", "hpv_vaccination(x) -> reduces(cervical_cancer, x)", "adeyemi", 49, "vaccination", "observational", "frequentist", "lancet", "replicated",
     {"costs": {"fp": 0.9, "fn": 0.9}}),
]

# entries that should be turned away, one per rejection path
REJECTS = [
    ("R1", "homeopathy(x) -> cures(influenza, x)", "novak", 50, "alternative", "other", "none", "arx", "untested", {"drop": "doi"}),
    ("R2", "vitamin_c(x) -> prevents(common_cold, x)", "novak", 51, "vitamins", "observational", "frequentist", "arx", "untested",
     {"flags": {"verifiable": True, "indexed": True, "peer_reviewed": False}}),
    ("R3", "immunotherapy(x) -> cures(pancreatic_cancer, x)", "novak", 52, "immunotherapy", "observational", "frequentist", "arx", "untested",
     {"costs": {"fp": 0.95, "fn": 0.95}, "domains": ["immunotherapy"]}),
    ("R4", "coffee(x) -> reduces(liver_disease, x)", "okafor", 53, "diet", "observational", "frequentist", "bmj", "untested", {"bad_signature": True}),
]

SIGNED = {"S1", "S5", "X2", "X3", "O1", "O2", "P2", "K2"}


def iso(day: float) -> str:
    return (BASE + timedelta(days=day)).strftime("%Y-%m-%dT%H:%M:%SZ")


def embedding(rng: random.Random) -> list[float]:
    return [round(rng.gauss(0.0, 1.0), 6) for _ in range(8)]


def build_entry(row, rng, key, embeddings) -> dict:
    label, form, who, day, concept, method, frame, venue, repl, extra = row
    orcid, name, affiliation, profile = AUTHORS[who]
    author = {"orcid": orcid or None, "name": name, "affiliation": affiliation}
    if profile is not None:
        author["profile"] = profile
    flags = extra.get("flags", {"verifiable": True, "indexed": True, "peer_reviewed": True})
    doi = f"10.5555/bewa.case.{label.lower()}"
    entry = {
        "id": label,
        "normalized_form": form,
        "author": author,
        "asserted_at": iso(day),
        "context": {"concept": concept, "method": method, "statistical_frame": frame},
        "domains": extra.get("domains", [concept]),
        "metadata": {
            "doi": "" if extra.get("drop") == "doi" else doi,
            "published_at": iso(day + 1),
            "venue": VENUES[venue],
            "funding": f"grant:{who}",
            "replication_status": repl,
            "source_flags": flags,
        },
    }
    for field in ("links", "contradicts", "supersedes", "relation", "exclusive_set", "costs"):
        if field in extra:
            entry[field] = extra[field]
    contra = extra.get("contradicts")
    if contra:
        # near-antipodal to the claim it contradicts, so the semantic detector agrees with the declaration
        base = embeddings[contra[0]]
        entry["embedding"] = [round(-x + rng.gauss(0.0, 0.05), 6) for x in base]
    elif label == "X4":
        entry["embedding"] = [round(x + rng.gauss(0.0, 0.05), 6) for x in embeddings["X3"]]
    else:
        entry["embedding"] = embedding(rng)
    embeddings[label] = entry["embedding"]
    if label in SIGNED or extra.get("bad_signature"):
        ident = canonical_author_id(author["orcid"], name, affiliation)
        asserted = parse_time(entry["asserted_at"])
        ccs = canonical_claim_signature(form, ident.caid, asserted)
        content = metadata_content_hash(ident.caid, ccs, doi, parse_time(entry["metadata"]["published_at"]), VENUES[venue]["name"])
        sig = bytearray(sign_claim(bytes.fromhex(content), key))
        if extra.get("bad_signature"):
            sig[0] ^= 0x01
        entry["signature"] = bytes(sig).hex()
        entry["signer_key"] = public_hex(key)
    return entry


def build_events() -> list[dict]:
    """Evidence, decay ticks, conflict resolution, a retraction and epoch seals over 2024."""
    ev: list[dict] = []

    def add(day: float, op: str, **kw) -> None:
        ev.append({"t": iso(day), "op": op, **kw})

    def replicate(label: str, day: float, n: int, quality: float = 0.9) -> None:
        for i in range(n):
            add(day + i, "evidence", ccs=label, kind="replication", quality=quality,
                source=f"rep:{label.lower()}:{i}", authors=[f"lab-{label.lower()}-{i}"], institutions=[f"inst-{i}"])

    def cite(label: str, day: float, n: int, quality: float = 0.8, cluster: str | None = None) -> None:
        for i in range(n):
            add(day + i, "evidence", ccs=label, kind="citation", quality=quality,
                source=f"cite:{label.lower()}:{i}", cluster=cluster or f"cluster-{i % 3}")

    day_of = {row[0]: row[3] for row in CLAIMS}
    strong = ["S1", "S2", "S5", "S7", "S9", "N2", "N3", "N4", "N7", "N8", "P2", "P4", "P8", "P9",
              "X2", "X3", "X4", "X5", "X6", "X7", "K2", "K4", "O1", "O2", "O3", "O4", "O6"]
    moderate = ["S4", "S6", "S8", "S10", "N1", "N5", "N6", "N9", "P1", "P3", "P5", "P6", "X1", "X8", "K5", "O5"]
    # the rest (N10, P7, P10, K1, K3, K6) gather only a stray citation and expire out of probation
    for label in strong:
        replicate(label, day_of[label] + 10, 2)
        cite(label, day_of[label] + 14, 3)
    for label in moderate:
        replicate(label, day_of[label] + 12, 1, quality=0.8)
        cite(label, day_of[label] + 15, 4, quality=0.7)
    for label in ("N10", "P7", "K1", "K3"):
        cite(label, day_of[label] + 20, 1, quality=0.5)
    # endorsements push both sides of each conflicting pair above the conflict threshold
    for label in ("S4", "S5", "N1", "N2", "P1", "P2", "P3", "P4", "X1", "X2"):
        for i in range(3):
            add(day_of[label] + 30 + i, "evidence", ccs=label, kind="endorsement", quality=0.8, source=f"endorse:{label.lower()}:{i}")
    # failed replications and direct counter-evidence
    for label in ("P1", "P3", "X1"):
        for i in range(2):
            add(day_of[label] + 60 + i, "evidence", ccs=label, kind="contradiction", quality=0.9, source=f"fail:{label.lower()}:{i}")
    add(day_of["P10"] + 25, "evidence", ccs="P10", kind="contradiction", quality=0.7, source="fail:p10:0")
    for month in range(1, 13):
        day = (datetime(2024, month, 28, tzinfo=timezone.utc) - BASE).days
        add(day, "decay_tick")
        add(day, "propagate")
        if month in (4, 8, 12):
            add(day, "resolve_conflicts")
        if month in (3, 6, 9, 12):
            add(day, "seal")
    add((datetime(2024, 7, 15, tzinfo=timezone.utc) - BASE).days, "retract", ccs="N3")
    add((datetime(2024, 7, 15, tzinfo=timezone.utc) - BASE).days, "propagate")
    order = {"evidence": 0, "retract": 1, "decay_tick": 2, "propagate": 3, "resolve_conflicts": 4, "seal": 5}
    return sorted(ev, key=lambda e: (e["t"], order[e["op"]]))


def main() -> None:
    rng = random.Random(20240101)
    key = key_from_seed(SIGNER_SEED)
    embeddings: dict[str, list[float]] = {}
    entries = [build_entry(row, rng, key, embeddings) for row in CLAIMS]
    rejects = [build_entry(row, rng, key, embeddings) for row in REJECTS]
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "case_study.json").write_text(json.dumps(entries, indent=1) + "\n", encoding="utf-8")
    (OUT / "case_study_rejects.json").write_text(json.dumps(rejects, indent=1) + "\n", encoding="utf-8")
    (OUT / "case_study_events.json").write_text(json.dumps(build_events(), indent=1) + "\n", encoding="utf-8")
    print(f"{len(entries)} claims, {len(rejects)} rejects, signer {public_hex(key)}")


if __name__ == "__main__":
    main()
