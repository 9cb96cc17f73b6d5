use crate::error::{Error, Result};

use super::{Label, Span};

/// Decodes a label sequence into maximal opinion spans.
///
/// A span opens at `B` and runs through the following `I`s. An `I` with no
/// open span (after `O` or at sentence start) opens a new span, so every
/// sequence decodes.
pub fn bio_decode(labels: &[Label]) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut open: Option<usize> = None;
    for (i, &label) in labels.iter().enumerate() {
        match label {
            Label::O => {
                if let Some(start) = open.take() {
                    spans.push(Span::new(start, i));
                }
            }
            Label::B => {
                if let Some(start) = open.replace(i) {
                    spans.push(Span::new(start, i));
                }
            }
            Label::I => {
                if open.is_none() {
                    open = Some(i);
                }
            }
        }
    }
    if let Some(start) = open {
        spans.push(Span::new(start, labels.len()));
    }
    spans
}

/// Encodes disjoint spans into a length-`n` label sequence.
pub fn bio_encode(n: usize, spans: &[Span]) -> Result<Vec<Label>> {
    let mut labels = vec![Label::O; n];
    for span in spans {
        if span.is_empty() || span.end > n {
            return Err(Error::annotation(
                span.start,
                format!("span {span} invalid for length {n}"),
            ));
        }
        if labels[span.start..span.end].iter().any(|&l| l != Label::O) {
            return Err(Error::annotation(span.start, format!("span {span} overlaps")));
        }
        labels[span.start] = Label::B;
        for l in &mut labels[span.start + 1..span.end] {
            *l = Label::I;
        }
    }
    Ok(labels)
}

/// Strict check used on gold annotation: an `I` must follow `B` or `I`.
pub fn validate_bio(labels: &[Label]) -> Result<()> {
    let mut prev = Label::O;
    for (i, &label) in labels.iter().enumerate() {
        if label == Label::I && prev == Label::O {
            return Err(Error::annotation(i, "I tag not preceded by B or I"));
        }
        prev = label;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::*;

    #[test]
    fn decodes_food_and_service_rows() {
        assert_eq!(
            bio_decode(&[O, O, O, B, O, O, O, O, O, O]),
            vec![Span::new(3, 4)]
        );
        assert_eq!(
            bio_decode(&[O, O, O, O, O, O, O, O, B, I]),
            vec![Span::new(8, 10)]
        );
    }

    #[test]
    fn dangling_inside_opens_span() {
        assert_eq!(
            bio_decode(&[I, O, B, I, I]),
            vec![Span::new(0, 1), Span::new(2, 5)]
        );
        assert_eq!(bio_decode(&[O, I, I, B]), vec![Span::new(1, 3), Span::new(3, 4)]);
    }

    #[test]
    fn adjacent_begins_split() {
        assert_eq!(bio_decode(&[B, B, I]), vec![Span::new(0, 1), Span::new(1, 3)]);
    }

    #[test]
    fn strict_validation_reports_index() {
        let err = validate_bio(&[O, B, O, I]).unwrap_err();
        assert!(matches!(err, Error::Annotation { index: 3, .. }));
        assert!(validate_bio(&[B, I, I, O, B]).is_ok());
    }

    #[test]
    fn encode_rejects_overlap() {
        assert!(bio_encode(5, &[Span::new(0, 2), Span::new(1, 3)]).is_err());
        assert!(bio_encode(3, &[Span::new(2, 4)]).is_err());
        assert_eq!(
            bio_encode(4, &[Span::new(1, 3)]).unwrap(),
            vec![O, B, I, O]
        );
    }
}
