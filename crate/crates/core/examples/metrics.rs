//! Confusion matrix, P_cc, precision and sensitivity on a hand-made set of
//! predictions.

use ssda_amc::eval::{confusion, write_confusion_csv};
use ssda_amc::siggen::ModulationFamily;

fn main() -> ssda_amc::Result<()> {
    // Ten vectors per family; DQPSK is half mistaken for DBPSK and nothing
    // else goes wrong.
    let mut truths = Vec::new();
    let mut preds = Vec::new();
    for family in ModulationFamily::ALL {
        for i in 0..10 {
            truths.push(family.index());
            let wrong = family == ModulationFamily::Dqpsk && i % 2 == 0;
            preds.push(if wrong {
                ModulationFamily::Dbpsk.index()
            } else {
                family.index()
            });
        }
    }
    let m = confusion(&preds, &truths)?;

    println!(
        "P_cc {:.4}  accuracy {:.4}",
        m.pcc()?,
        m.accuracy().unwrap_or(f64::NAN)
    );
    for family in ModulationFamily::ALL {
        let k = family.index();
        let precision = m.precision(k).map_or("undefined".into(), |p| format!("{p:.3}"));
        println!(
            "{family:>6}: precision {precision:>9}  sensitivity {:.3}",
            m.sensitivity(k)?
        );
    }

    let mut csv = Vec::new();
    write_confusion_csv(&mut csv, &m, true)?;
    print!("{}", String::from_utf8_lossy(&csv));

    // A class with no true samples leaves its sensitivity, and so P_cc,
    // undefined.
    let partial = confusion(&[0, 1, 1], &[0, 1, 2])?;
    println!("P_cc with absent classes: {:?}", partial.pcc().err());
    Ok(())
}
