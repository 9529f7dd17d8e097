//! Price ingestion: turns a file of daily closing prices into log returns
//! normalized to unit sample variance.

use anyhow::{bail, Context, Result};

/// Parses one closing price per line. An optional leading date column
/// (anything before the last comma or whitespace run) is ignored. Errors
/// name the offending line.
pub fn parse_prices(text: &str) -> Result<Vec<f64>> {
    let mut prices = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let field = line
            .rsplit(|c: char| c == ',' || c.is_whitespace())
            .next()
            .unwrap_or(line)
            .trim();
        let price: f64 = field
            .parse()
            .with_context(|| format!("line {}: cannot parse price `{raw}`", lineno + 1))?;
        if !(price > 0.0) || !price.is_finite() {
            bail!("line {}: price must be strictly positive, got {price}", lineno + 1);
        }
        prices.push(price);
    }
    Ok(prices)
}

/// Log returns of a price series, divided by their sample standard
/// deviation so the output has unit sample variance.
pub fn normalize_returns(prices: &[f64]) -> Result<Vec<f64>> {
    if prices.len() < 3 {
        bail!("need at least 3 prices, got {}", prices.len());
    }
    let returns: Vec<f64> = prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    let m = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / m;
    let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (m - 1.0);
    if !(var > 0.0) {
        bail!("returns have zero sample variance, cannot normalize");
    }
    let sd = var.sqrt();
    Ok(returns.into_iter().map(|r| r / sd).collect())
}

pub fn ingest_prices(text: &str) -> Result<Vec<f64>> {
    normalize_returns(&parse_prices(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_prices_have_zero_variance() {
        let err = ingest_prices("100\n100\n100\n100\n").unwrap_err();
        assert!(err.to_string().contains("zero sample variance"));
    }

    #[test]
    fn geometric_prices_have_constant_returns() {
        let e = std::f64::consts::E;
        let text = format!("1.0\n{e}\n{}\n", e * e);
        let err = ingest_prices(&text).unwrap_err();
        assert!(err.to_string().contains("zero sample variance"));
    }

    #[test]
    fn alternating_prices_normalize_to_unit_variance() {
        let returns = ingest_prices("1\n2\n1\n2\n1\n").unwrap();
        assert_eq!(returns.len(), 4);
        let m = returns.len() as f64;
        let mean = returns.iter().sum::<f64>() / m;
        let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (m - 1.0);
        assert!((var - 1.0).abs() < 1e-12);
        // Hand check: raw returns are +-ln 2 alternating, mean -> sd ratio
        // fixed by the normalization.
        assert!((returns[0] + returns[1]).abs() < 1e-12);
    }

    #[test]
    fn errors_name_the_line() {
        let err = parse_prices("100\nnot-a-price\n").unwrap_err();
        assert!(format!("{err:#}").contains("line 2"));
        let err = parse_prices("100\n-3\n").unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn date_columns_are_ignored() {
        let prices = parse_prices("2020-01-02,100.5\n2020-01-03 101.25\n").unwrap();
        assert_eq!(prices, vec![100.5, 101.25]);
    }

    #[test]
    fn too_few_prices() {
        assert!(ingest_prices("1\n2\n").is_err());
    }
}
