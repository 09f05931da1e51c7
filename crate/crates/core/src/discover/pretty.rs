//! Equation formatting, e.g. `dx/dt = -0.098 x^3 + 1.995 y^3`.

use crate::error::Result;
use crate::model::DiscoveredModel;

/// One equation per state variable, using the library's variable names.
pub fn pretty_print(model: &DiscoveredModel) -> Vec<String> {
    format_equations(model, model.library.variables(), |i| model.library.terms()[i].label.clone())
}

/// As [`pretty_print`] with the state variables renamed (e.g. `["x", "y"]`).
pub fn pretty_print_named(model: &DiscoveredModel, names: &[&str]) -> Result<Vec<String>> {
    let lib = model.library.renamed(names)?;
    Ok(format_equations(model, lib.variables(), |i| lib.terms()[i].label.clone()))
}

fn format_equations(
    model: &DiscoveredModel,
    variables: &[String],
    label: impl Fn(usize) -> String,
) -> Vec<String> {
    let c = &model.coefficients;
    variables
        .iter()
        .enumerate()
        .map(|(v, name)| {
            let mut rhs = String::new();
            for i in 0..c.n_terms() {
                let x = c.get(i, v);
                if !c.is_active(i, v) || x == 0.0 {
                    continue;
                }
                let term = label(i);
                let body = if term == "1" {
                    format!("{:.3}", x.abs())
                } else {
                    format!("{:.3} {term}", x.abs())
                };
                match (rhs.is_empty(), x < 0.0) {
                    (true, false) => rhs.push_str(&body),
                    (true, true) => {
                        rhs.push('-');
                        rhs.push_str(&body);
                    }
                    (false, false) => {
                        rhs.push_str(" + ");
                        rhs.push_str(&body);
                    }
                    (false, true) => {
                        rhs.push_str(" - ");
                        rhs.push_str(&body);
                    }
                }
            }
            if rhs.is_empty() {
                rhs.push('0');
            }
            format!("d{name}/dt = {rhs}")
        })
        .collect()
}
