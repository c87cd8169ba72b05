use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

const PANELS: [(&str, usize, bool); 4] = [
    ("grad_norm_sq", 3, true),
    ("consensus_error", 2, true),
    ("objective", 4, false),
    ("dist_to_opt", 5, true),
];

fn quote(p: &Path) -> String {
    format!("'{}'", p.display().to_string().replace('\'', "''"))
}

/// A gnuplot script drawing the four traces of every CSV in a 2×2 layout.
///
/// The objective panel stays linear since the objective can be negative.
pub fn plot_script(csv_paths: &[PathBuf]) -> Result<String> {
    if csv_paths.is_empty() {
        return Err(Error::NoInputs);
    }
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set terminal pngcairo size 1400,1000\n");
    s.push_str("set output 'traces.png'\n");
    s.push_str("set multiplot layout 2,2\n");
    s.push_str("set xlabel 'iteration'\n");
    s.push_str("set key top right\n");
    for (name, col, log) in PANELS {
        s.push_str(&format!("set title '{name}'\n"));
        s.push_str(if log {
            "set logscale y\n"
        } else {
            "unset logscale y\n"
        });
        let curves: Vec<String> = csv_paths
            .iter()
            .map(|p| {
                let title = p
                    .file_stem()
                    .map(|t| t.to_string_lossy().into_owned())
                    .unwrap_or_default();
                format!(
                    "{} every ::1 using 1:{col} with lines title '{}'",
                    quote(p),
                    title.replace('\'', "''").replace('_', "\\_")
                )
            })
            .collect();
        s.push_str(&format!("plot {}\n", curves.join(", \\\n     ")));
    }
    s.push_str("unset multiplot\n");
    Ok(s)
}

pub fn emit_plot_script(csv_paths: &[PathBuf], out: &Path) -> Result<()> {
    let text = plot_script(csv_paths)?;
    fs::write(out, text).map_err(|e| Error::io(out, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_panels_and_only_given_paths() {
        let paths = vec![PathBuf::from("runs/a.csv")];
        let s = plot_script(&paths).unwrap();
        assert_eq!(s.matches("\nplot ").count(), 4);
        assert_eq!(s.matches("'runs/a.csv'").count(), 4);
        assert_eq!(s.matches(".csv").count(), 4);
        assert!(matches!(plot_script(&[]), Err(Error::NoInputs)));
    }
}
