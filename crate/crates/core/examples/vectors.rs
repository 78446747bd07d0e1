//! Reading word vectors from the whitespace text format and comparing them.
//!
//! ```bash
//! cargo run --example vectors
//! ```

use std::io::Cursor;

use adjacency::embeddings::{cosine_distance, cosine_similarity, EmbeddingTable, TableKind};

const VECTORS: &str = "\
4 3
king 0.8 0.3 0.1
queen 0.7 0.4 0.1
court 0.5 0.1 0.9
king 9 9 9
";

pub fn run_example() -> adjacency::Result<()> {
    let (table, report) = EmbeddingTable::read_text(
        Cursor::new(VECTORS),
        "inline",
        TableKind::Pretrained,
        Some(3),
        None,
    )?;
    println!(
        "{} vectors of dimension {} (header skipped: {}, duplicates ignored: {})",
        table.len(),
        table.dimension(),
        report.header_skipped,
        report.duplicates
    );

    let king = table.get("king").expect("present");
    for other in ["queen", "court"] {
        let v = table.get(other).expect("present");
        println!(
            "king/{other}: similarity {:.4}, distance {:.4}",
            cosine_similarity(king, v)?,
            cosine_distance(king, v)?
        );
    }

    // A dimension mismatch names the offending line.
    let bad = "a 1 2 3\nb 1 2\n";
    match EmbeddingTable::read_text(
        Cursor::new(bad),
        "bad.txt",
        TableKind::Pretrained,
        None,
        None,
    ) {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!(),
    }

    let mut out = Vec::new();
    table.write_text(&mut out).expect("in-memory write");
    print!("{}", String::from_utf8_lossy(&out));
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
