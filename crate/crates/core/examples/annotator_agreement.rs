//! Quadratic weighted kappa between two raters.

use mtadv::corpus::{pairwise_agreement, qwk, RaterTable};

fn main() -> mtadv::Result<()> {
    let csv = "item,rating_a,rating_b\n\
               u1,0,0\nu2,1,1\nu3,2,1\nu4,2,2\nu5,1,0\nu6,0,0\nu7,2,2\nu8,1,2\n";
    let table = RaterTable::from_csv(csv, Some(3))?;
    println!("observed counts: {:?}", table.observed());
    println!("qwk: {:.4}", qwk(&table)?);
    println!("pairwise agreement: {:.4}", pairwise_agreement(&table)?);
    Ok(())
}
