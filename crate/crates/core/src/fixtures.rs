//! Small hand-built graphs used by tests, benches and documentation.

use crate::kg::DatasetSplit;

/// Three players of team A (two British, one French), and two teams with
/// known locations.
pub const F1_TRIPLES: [(&str, &str, &str); 8] = [
    ("p1", "member_of", "A"),
    ("p2", "member_of", "A"),
    ("p3", "member_of", "A"),
    ("p1", "nationality", "UK"),
    ("p2", "nationality", "UK"),
    ("p3", "nationality", "FR"),
    ("A", "located_in", "UK"),
    ("B", "located_in", "FR"),
];

pub fn f1() -> DatasetSplit {
    DatasetSplit::from_strings(&F1_TRIPLES, &[], &[])
}

/// Sports-team graph: teams A and B have known locations, team C does not.
/// Player nationalities favour the true location by majority, while each
/// team's managers point at two countries evenly (C's single manager is
/// German).
pub const SPORTS_TRIPLES: [(&str, &str, &str); 32] = [
    ("p1", "member_of", "TeamA"),
    ("p2", "member_of", "TeamA"),
    ("p3", "member_of", "TeamA"),
    ("p4", "member_of", "TeamB"),
    ("p5", "member_of", "TeamB"),
    ("p6", "member_of", "TeamB"),
    ("p7", "member_of", "TeamB"),
    ("p8", "member_of", "TeamC"),
    ("p9", "member_of", "TeamC"),
    ("p10", "member_of", "TeamC"),
    ("p1", "nationality", "UK"),
    ("p2", "nationality", "UK"),
    ("p3", "nationality", "France"),
    ("p4", "nationality", "France"),
    ("p5", "nationality", "France"),
    ("p6", "nationality", "Germany"),
    ("p7", "nationality", "Italy"),
    ("p8", "nationality", "Italy"),
    ("p9", "nationality", "Italy"),
    ("p10", "nationality", "Germany"),
    ("m1", "manager_of", "TeamA"),
    ("m2", "manager_of", "TeamA"),
    ("m3", "manager_of", "TeamB"),
    ("m4", "manager_of", "TeamB"),
    ("m5", "manager_of", "TeamC"),
    ("m1", "nationality", "UK"),
    ("m2", "nationality", "France"),
    ("m3", "nationality", "France"),
    ("m4", "nationality", "Germany"),
    ("m5", "nationality", "Germany"),
    ("TeamA", "located_in", "UK"),
    ("TeamB", "located_in", "France"),
];

pub fn sports() -> DatasetSplit {
    DatasetSplit::from_strings(&SPORTS_TRIPLES, &[], &[])
}
