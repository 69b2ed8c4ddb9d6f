use crate::CliError;

/// Parses a threshold grid: a scalar `4.5`, a list `4,4.5,5`, or an inclusive
/// range `a:b:step`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(CliError::Config("b grid is empty".into()));
    }
    let grid = if text.contains(':') {
        let parts: Vec<f64> = text.split(':').map(number).collect::<Result<_, _>>()?;
        let [a, b, step] = parts[..] else {
            return Err(CliError::Config(format!("b grid `{text}` must look like a:b:step")));
        };
        if !(step > 0.0) {
            return Err(CliError::Config(format!("b grid step must be positive, got {step}")));
        }
        if b < a {
            return Err(CliError::Config(format!("b grid `{text}` is empty")));
        }
        let n = ((b - a) / step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| round(a + i as f64 * step)).collect()
    } else {
        text.split(',').map(number).collect::<Result<Vec<_>, _>>()?
    };
    if grid.iter().any(|b| !(*b > 0.0) || !b.is_finite()) {
        return Err(CliError::Config("b values must be positive and finite".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Config("b values must be strictly increasing".into()));
    }
    Ok(grid)
}

fn number(s: &str) -> Result<f64, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Config(format!("`{s}` is not a number")))
}

fn round(x: f64) -> f64 {
    (x * 1e10).round() / 1e10
}
