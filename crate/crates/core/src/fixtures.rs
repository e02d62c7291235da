//! Small reference datasets used in tests, docs and the CLI examples.

use crate::dataset::{Dataset, Row};

/// 8 rows, 5 features. `C = F4 xor F5` although both have zero mutual
/// information with the class.
pub const TABLE1_CSV: &str = "\
F1,F2,F3,F4,F5,C
1,0,1,1,1,0
1,1,0,0,0,0
0,0,0,1,1,0
1,0,1,0,0,0
1,1,1,1,0,1
0,1,0,1,0,1
0,1,0,0,1,1
0,0,0,0,1,1
";

/// 7 rows, 4 features, two positives. Rows 2/6 and 3/7 are duplicates.
pub const TABLE2_CSV: &str = "\
F1,F2,F3,F4,C
0,1,1,0,1
1,0,1,0,0
1,1,0,0,0
0,1,0,1,0
0,0,1,1,1
1,0,1,0,0
1,1,0,0,0
";

fn parse(rows: &[(&[u8], u8)], k: usize) -> Dataset {
    Dataset::with_rows(k, rows.iter().map(|(f, c)| Row::from_bits(f, *c)).collect())
        .expect("fixture")
}

pub fn table1() -> Dataset {
    parse(
        &[
            (&[1, 0, 1, 1, 1], 0),
            (&[1, 1, 0, 0, 0], 0),
            (&[0, 0, 0, 1, 1], 0),
            (&[1, 0, 1, 0, 0], 0),
            (&[1, 1, 1, 1, 0], 1),
            (&[0, 1, 0, 1, 0], 1),
            (&[0, 1, 0, 0, 1], 1),
            (&[0, 0, 0, 0, 1], 1),
        ],
        5,
    )
}

pub fn table2() -> Dataset {
    parse(
        &[
            (&[0, 1, 1, 0], 1),
            (&[1, 0, 1, 0], 0),
            (&[1, 1, 0, 0], 0),
            (&[0, 1, 0, 1], 0),
            (&[0, 0, 1, 1], 1),
            (&[1, 0, 1, 0], 0),
            (&[1, 1, 0, 0], 0),
        ],
        4,
    )
}
