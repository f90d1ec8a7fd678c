//! Line-oriented extraction grammar for attestation text.
//!
//! Matches labeled monetary phrases ("total assets", "total liabilities",
//! "in circulation") case-insensitively, resolving currency symbols,
//! digit-group separators, and unit words to plain decimals.

use std::sync::OnceLock;

use regex::Regex;

use crate::error::{Error, Result};
use crate::types::{DisclosureDocument, DisclosureExtract, MediaKind, ReserveFigures};

const NUM: &str = r"(\d{1,3}(?:,\d{3})+(?:\.\d+)?|\d+(?:\.\d+)?)";
const UNIT: &str = r"(thousand|million|billion|trillion)?";

struct Grammar {
    assets: Vec<Regex>,
    liabilities: Vec<Regex>,
    circulation: Vec<Regex>,
}

fn grammar() -> &'static Grammar {
    static GRAMMAR: OnceLock<Grammar> = OnceLock::new();
    GRAMMAR.get_or_init(|| {
        // the gap between label and amount must not cross a clause boundary
        let label_first = |label: &str| {
            Regex::new(&format!(r"(?i){label}[^0-9$,;.]*\$?\s*{NUM}\s*{UNIT}")).unwrap()
        };
        Grammar {
            assets: vec![label_first(r"total\s+(?:reserve\s+)?assets")],
            liabilities: vec![label_first(r"total\s+liabilities")],
            circulation: vec![
                // number-before-label form: "82.19 billion tokens in circulation"
                Regex::new(&format!(
                    r"(?i)\$?\s*{NUM}\s*{UNIT}\s*(?:tokens?\s+)?in\s+circulation"
                ))
                .unwrap(),
                label_first(r"in\s+circulation"),
            ],
        }
    })
}

fn unit_multiplier(word: &str) -> f64 {
    match word.to_ascii_lowercase().as_str() {
        "thousand" => 1e3,
        "million" => 1e6,
        "billion" => 1e9,
        "trillion" => 1e12,
        _ => 1.0,
    }
}

fn parse_amount(digits: &str, unit: Option<&str>) -> f64 {
    let plain: String = digits.chars().filter(|c| *c != ',').collect();
    let mantissa: f64 = plain.parse().expect("regex guarantees a valid decimal");
    mantissa * unit.map(unit_multiplier).unwrap_or(1.0)
}

fn extract_field(text: &str, rules: &[Regex], name: &str) -> Result<f64> {
    for rule in rules {
        if let Some(caps) = rule.captures(text) {
            let digits = caps.get(1).unwrap().as_str();
            let unit = caps.get(2).map(|m| m.as_str());
            return Ok(parse_amount(digits, unit));
        }
    }
    Err(Error::MissingField(name.to_string()))
}

/// Extract structured reserve figures from a disclosure document.
///
/// Image-only documents are flagged `extractable = false` and carry no
/// numerics; they are excluded from classification downstream.
pub fn extract_disclosure(doc: &DisclosureDocument) -> Result<DisclosureExtract> {
    doc.validate()?;
    if doc.media_kind == MediaKind::ImageOnly {
        return DisclosureExtract::new(
            doc.asset.clone(),
            doc.report_date,
            None,
            None,
            doc.source_id.clone(),
        );
    }
    let body = doc
        .body
        .as_deref()
        .ok_or_else(|| Error::MissingField("body".to_string()))?;
    let g = grammar();
    let figures = ReserveFigures::new(
        extract_field(body, &g.circulation, "circulation")?,
        extract_field(body, &g.assets, "assets")?,
        extract_field(body, &g.liabilities, "liabilities")?,
    )?;
    DisclosureExtract::new(
        doc.asset.clone(),
        doc.report_date,
        Some(figures),
        None,
        doc.source_id.clone(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{parse_date, AssetId};

    fn doc(kind: MediaKind, body: Option<&str>) -> DisclosureDocument {
        DisclosureDocument {
            source_id: "test".to_string(),
            asset: AssetId::usdt(),
            report_date: parse_date("2022-05-18").unwrap(),
            media_kind: kind,
            body: body.map(|s| s.to_string()),
        }
    }

    #[test]
    fn extracts_table2_values_from_synthetic_text() {
        let d = doc(
            MediaKind::Text,
            Some(
                "Total assets: $82.42 billion. Total liabilities to token holders: \
                 $82.26 billion. Tokens in circulation: 82,190,000,000.",
            ),
        );
        let e = extract_disclosure(&d).unwrap();
        let f = e.figures.unwrap();
        assert_eq!(f.asset_value, 82.42 * 1e9);
        assert_eq!(f.liability_value, 82.26 * 1e9);
        assert_eq!(f.circulation_rep, 82190000000.0);
    }

    #[test]
    fn image_only_is_not_extractable() {
        let e = extract_disclosure(&doc(MediaKind::ImageOnly, None)).unwrap();
        assert!(!e.extractable);
        assert!(e.figures.is_none());
    }

    #[test]
    fn unit_values_of_one() {
        let d = doc(
            MediaKind::Text,
            Some("assets total assets $1, total liabilities $1, 1 token in circulation"),
        );
        let e = extract_disclosure(&d).unwrap();
        let f = e.figures.unwrap();
        assert_eq!(f.asset_value, 1.0);
        assert_eq!(f.liability_value, 1.0);
        assert_eq!(f.circulation_rep, 1.0);
    }

    #[test]
    fn missing_field_is_named() {
        let d = doc(
            MediaKind::Text,
            Some("Total assets: $5 billion. Tokens in circulation: 4,900,000,000."),
        );
        let err = extract_disclosure(&d).unwrap_err();
        assert!(err.to_string().contains("liabilities"), "{err}");
    }

    #[test]
    fn empty_body_text_document_fails() {
        assert!(extract_disclosure(&doc(MediaKind::Text, Some(""))).is_err());
        assert!(extract_disclosure(&doc(MediaKind::Text, None)).is_err());
    }

    #[test]
    fn thousands_separators_and_units_mix() {
        let d = doc(
            MediaKind::Text,
            Some(
                "Total assets of $1,234.5 million; total liabilities 1,230 million; \
                 1,229,000,000 in circulation",
            ),
        );
        let f = extract_disclosure(&d).unwrap().figures.unwrap();
        assert_eq!(f.asset_value, 1234.5 * 1e6);
        assert_eq!(f.liability_value, 1230.0 * 1e6);
        assert_eq!(f.circulation_rep, 1229000000.0);
    }
}
