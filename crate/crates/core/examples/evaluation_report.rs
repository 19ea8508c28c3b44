//! Accuracy, macro P/R/F1 and row-normalized confusion percentages.

use mtadv::eval::{confusion_csv, evaluate, render_results_table, ResultRow};
use mtadv::{Attribute, PerAttribute, Role};

fn main() -> mtadv::Result<()> {
    let labels = [0, 0, 0, 1, 1, 1, 1, 0];
    let preds = [0, 1, 0, 1, 1, 0, 1, 0];
    let report = evaluate(&preds, &labels, 2)?;
    println!("accuracy {:.3}, macro F1 {:.3}", report.accuracy, report.f1);
    print!("{}", confusion_csv(&report, &Attribute::Dialect.class_names())?);
    let row = ResultRow {
        model: "toy".into(),
        roles: PerAttribute([Role::Primary, Role::Off, Role::Off]),
        report,
    };
    print!("{}", render_results_table(&[row]));
    Ok(())
}
