//! Turns a conditional table into a deterministic mechanism of one shared noise
//! variable, then checks that the induced conditional matches the table.

use cfrl::scm::checks::reconstruction_error;
use cfrl::scm::{uniformize, ConditionalTable};

fn main() -> cfrl::Result<()> {
    let table = ConditionalTable {
        support: vec!["low".into(), "mid".into(), "high".into()],
        rows: vec![vec![0.2, 0.5, 0.3], vec![0.6, 0.1, 0.3], vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]],
    };
    let u = uniformize("U", &table)?;
    println!("{} rows, {} noise atoms", u.n_rows(), u.n_atoms());
    println!("breakpoints: {:?}", u.breakpoints);
    for (r, row) in table.rows.iter().enumerate() {
        let f: Vec<&str> = (0..u.n_atoms()).map(|a| table.support[u.table[r * u.n_atoms() + a]].as_str()).collect();
        println!("row {r} {row:?}: {}", f.join(" "));
    }
    println!("reconstruction error: {:e}", reconstruction_error(&table, &u));
    Ok(())
}
