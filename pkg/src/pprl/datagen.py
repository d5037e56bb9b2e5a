"""Synthetic person datasets with planted cross-party overlap.

Two datasets share a chosen number of entities; the shared copies on the
right side are perturbed with small typographic edits so linkage is
non-trivial but feasible. Every record carries an entity id in the ground
truth sidecar (never inside the datasets themselves), which only the
post-hoc scorer reads.
"""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass

from .records import Dataset, FieldGroupSpec, Record

FIELD_NAMES = (
    "first_name",
    "last_name",
    "email",
    "email_domain",
    "address_number",
    "address_location",
    "address_line",
    "city",
    "state",
    "country",
    "zip_base",
    "zip_ext",
    "phone_area_code",
    "phone_exchange_code",
    "phone_line_number",
)

DEFAULT_GROUPS = (
    FieldGroupSpec(name="name", members=("first_name", "last_name"), shingle_len=5),
    FieldGroupSpec(name="email", members=("email", "email_domain"), shingle_len=5),
    FieldGroupSpec(
        name="address",
        members=(
            "address_number",
            "address_location",
            "address_line",
            "city",
            "state",
            "country",
        ),
        shingle_len=5,
    ),
    FieldGroupSpec(name="zip", members=("zip_base", "zip_ext"), shingle_len=4),
    FieldGroupSpec(
        name="phone",
        members=("phone_area_code", "phone_exchange_code", "phone_line_number"),
        shingle_len=4,
    ),
)

_FIRST = (
    "james mary robert patricia john jennifer michael linda david elizabeth "
    "william barbara richard susan joseph jessica thomas sarah charles karen "
    "christopher lisa daniel nancy matthew betty anthony margaret mark sandra "
    "donald ashley steven kimberly paul emily andrew donna joshua michelle "
    "kenneth carol kevin amanda brian melissa george deborah timothy stephanie "
    "ronald rebecca edward sharon jason laura jeffrey cynthia ryan kathleen "
    "jacob amy gary shirley nicholas angela eric anna jonathan ruth stephen "
    "brenda larry pamela justin nicole scott katherine brandon samantha "
    "benjamin christine samuel emma gregory catherine alexander debra patrick "
    "virginia frank rachel raymond carolyn jack janet dennis maria jerry "
    "heather tyler diane aaron julie jose joyce adam victoria nathan kelly "
    "henry christina douglas lauren zachary joan peter evelyn kyle olivia "
    "walter judith ethan megan jeremy cheryl harold andrea"
).split()

_LAST = (
    "smith johnson williams brown jones garcia miller davis rodriguez martinez "
    "hernandez lopez gonzalez wilson anderson thomas taylor moore jackson "
    "martin lee perez thompson white harris sanchez clark ramirez lewis "
    "robinson walker young allen king wright scott torres nguyen hill flores "
    "green adams nelson baker hall rivera campbell mitchell carter roberts "
    "gomez phillips evans turner diaz parker cruz edwards collins reyes "
    "stewart morris morales murphy cook rogers gutierrez ortiz morgan cooper "
    "peterson bailey reed kelly howard ramos kim cox ward richardson watson "
    "brooks chavez wood james bennett gray mendoza ruiz hughes price alvarez "
    "castillo sanders patel myers long ross foster jimenez powell jenkins "
    "perry russell sullivan bell coleman butler henderson barnes gonzales "
    "fisher vasquez simmons romero jordan patterson alexander hamilton graham "
    "reynolds griffin wallace moreno west cole hayes bryant herrera gibson "
    "ellis tran medina aguilar stevens murray ford castro marshall owens"
).split()

_STREETS = (
    "main oak maple cedar pine elm washington lake hill park walnut spring "
    "church north chestnut broad center union water south prospect highland "
    "mill river jefferson franklin ridge sunset lincoln jackson willow grant "
    "cherry madison forest meadow dogwood hickory laurel magnolia birch "
    "sycamore poplar juniper aspen cypress redwood sequoia hawthorn locust "
    "mulberry spruce alder beech hemlock fir cottonwood buckeye catalpa "
    "linden chester fulton harrison tyler monroe garfield cleveland hayes "
    "arthur harding coolidge hoover truman kennedy carter reagan fairview "
    "riverside lakeview hillcrest brookside greenwood oakdale elmwood"
).split()

_STREET_TYPES = "street avenue blvd drive lane road court place way terrace".split()

_CITIES = (
    "springfield rivertown lakeside fairview greenville bristol clinton "
    "georgetown salem madison franklin clayton dayton milton ashland dover "
    "hudson oxford burlington manchester winchester lexington concord newport "
    "portsmouth arlington auburn bedford berlin brighton bristol brockton "
    "cambridge chelsea danvers dedham everett fitchburg gardner gloucester "
    "haverhill holyoke lawrence leominster lowell lynn malden marlborough "
    "medford melrose methuen milford natick needham newton northampton "
    "norwood peabody pittsfield plymouth quincy revere somerville stoneham "
    "taunton wakefield waltham watertown westfield weymouth woburn worcester "
    "abilene amarillo anaheim anchorage bakersfield boulder chandler "
    "clearwater davenport elgin eugene fargo fresno frisco gilbert glendale "
    "hampton hartford hayward hollywood inglewood irving joliet lakewood "
    "lancaster lansing laredo lubbock macon mckinney mesquite midland mobile "
    "modesto montgomery murfreesboro naperville norfolk norman odessa olathe "
    "ontario orlando oxnard pasadena paterson peoria plano pomona provo "
    "pueblo renton richmond roanoke rockford roseville salinas savannah "
    "scottsdale shreveport stamford sunnyvale syracuse tacoma tempe thornton "
    "toledo topeka torrance tucson tulsa vallejo ventura visalia waco warren "
).split()

_STATES = (
    "alabama alaska arizona arkansas california colorado connecticut delaware "
    "florida georgia hawaii idaho illinois indiana iowa kansas kentucky "
    "louisiana maine maryland massachusetts michigan minnesota mississippi "
    "missouri montana nebraska nevada ohio oklahoma oregon pennsylvania "
    "tennessee texas utah vermont virginia washington wisconsin wyoming"
).split()

_COUNTRIES = (
    "united states",
    "canada",
    "mexico",
    "united kingdom",
    "australia",
    "ireland",
    "new zealand",
    "south africa",
)

_DOMAINS = (
    "gmail.com yahoo.com hotmail.com outlook.com aol.com icloud.com "
    "protonmail.com mail.com zoho.com fastmail.com"
).split()

_TYPO_ALPHABET = "abcdefghijklmnopqrstuvwxyz"


def _make_entity(rng: random.Random) -> dict[str, str]:
    first = rng.choice(_FIRST)
    last = rng.choice(_LAST)
    return {
        "first_name": first,
        "last_name": last,
        "email": f"{first}.{last}{rng.randrange(10, 9999)}",
        "email_domain": rng.choice(_DOMAINS),
        "address_number": str(rng.randrange(1, 9999)),
        "address_location": rng.choice(_STREETS),
        "address_line": rng.choice(_STREET_TYPES),
        "city": rng.choice(_CITIES),
        "state": rng.choice(_STATES),
        "country": rng.choice(_COUNTRIES),
        "zip_base": f"{rng.randrange(0, 100000):05d}",
        "zip_ext": f"{rng.randrange(0, 10000):04d}",
        "phone_area_code": f"{rng.randrange(200, 1000)}",
        "phone_exchange_code": f"{rng.randrange(200, 1000)}",
        "phone_line_number": f"{rng.randrange(0, 10000):04d}",
    }


def _typo(value: str, rng: random.Random) -> str:
    """One small character-level edit; empty or 1-char values get an insert."""
    if len(value) < 2:
        op = "insert"
    else:
        op = rng.choice(("swap", "drop", "duplicate", "replace", "insert"))
    if op == "swap":
        i = rng.randrange(len(value) - 1)
        return value[:i] + value[i + 1] + value[i] + value[i + 2 :]
    if op == "drop":
        i = rng.randrange(len(value))
        return value[:i] + value[i + 1 :]
    if op == "duplicate":
        i = rng.randrange(len(value))
        return value[: i + 1] + value[i] + value[i + 1 :]
    if op == "replace":
        i = rng.randrange(len(value))
        pool = "0123456789" if value[i].isdigit() else _TYPO_ALPHABET
        return value[:i] + rng.choice(pool) + value[i + 1 :]
    i = rng.randrange(len(value) + 1)
    pool = "0123456789" if value.isdigit() and value else _TYPO_ALPHABET
    return value[:i] + rng.choice(pool) + value[i:]


def perturb(
    fields: dict[str, str],
    rng: random.Random,
    *,
    typo_rate: float,
    max_typo_fields: int,
) -> dict[str, str]:
    """Apply at most max_typo_fields single-character edits across fields.

    Edits stay small on purpose: heavy corruption drives pair similarity
    into a regime where no banding shape can recover it reliably.
    """
    out = dict(fields)
    n_edits = sum(1 for _ in range(len(FIELD_NAMES)) if rng.random() < typo_rate)
    n_edits = min(n_edits, max_typo_fields)
    if n_edits:
        for name in rng.sample(FIELD_NAMES, n_edits):
            out[name] = _typo(out[name], rng)
    return out


@dataclass
class SyntheticPair:
    left: Dataset
    right: Dataset
    left_entities: dict[str, str]
    right_entities: dict[str, str]

    @property
    def shared_entities(self) -> set[str]:
        return set(self.left_entities.values()) & set(self.right_entities.values())


def generate_pair(
    n_left: int,
    n_right: int,
    n_shared: int,
    *,
    seed: int,
    typo_rate: float = 0.15,
    max_typo_fields: int = 2,
) -> SyntheticPair:
    """Two datasets sharing exactly n_shared entities.

    Shared entities appear verbatim on the left and perturbed on the right;
    all other entities are drawn independently per side.
    """
    if n_shared > min(n_left, n_right):
        raise ValueError("cannot share more entities than either side holds")
    rng = random.Random(seed)

    left_records: list[Record] = []
    left_entities: dict[str, str] = {}
    shared_fields: list[dict[str, str]] = []
    for i in range(n_left):
        fields = _make_entity(rng)
        rid = f"a{i:06d}"
        if i < n_shared:
            ent = f"shared-{i:06d}"
            shared_fields.append(fields)
        else:
            ent = f"left-{i:06d}"
        left_records.append(Record(id=rid, fields=fields))
        left_entities[rid] = ent

    right_records: list[Record] = []
    right_entities: dict[str, str] = {}
    for i in range(n_right):
        rid = f"b{i:06d}"
        if i < n_shared:
            ent = f"shared-{i:06d}"
            fields = perturb(
                shared_fields[i],
                rng,
                typo_rate=typo_rate,
                max_typo_fields=max_typo_fields,
            )
        else:
            ent = f"right-{i:06d}"
            fields = _make_entity(rng)
        right_records.append(Record(id=rid, fields=fields))
        right_entities[rid] = ent

    order = list(range(n_right))
    rng.shuffle(order)
    right_records = [right_records[i] for i in order]

    return SyntheticPair(
        left=Dataset(left_records),
        right=Dataset(right_records),
        left_entities=left_entities,
        right_entities=right_entities,
    )


def save_truth(pair: SyntheticPair, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["side", "record_id", "entity_id"])
        for rid, ent in pair.left_entities.items():
            writer.writerow(["left", rid, ent])
        for rid, ent in pair.right_entities.items():
            writer.writerow(["right", rid, ent])


def load_truth(path: str) -> tuple[dict[str, str], dict[str, str]]:
    left: dict[str, str] = {}
    right: dict[str, str] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            target = left if row["side"] == "left" else right
            target[row["record_id"]] = row["entity_id"]
    return left, right
