//! Ground-truth predictor built from point labels.

use std::collections::BTreeMap;

use super::GroupingPredictor;
use crate::error::{Error, Result};
use crate::geometry::{Label, LabeledCloud, Segment, BACKGROUND};

#[derive(Clone, Debug)]
pub struct OraclePredictor {
    labels: Vec<Label>,
}

impl OraclePredictor {
    pub fn new(cloud: &LabeledCloud) -> Result<Self> {
        let labels = cloud
            .labels()
            .ok_or_else(|| Error::Unlabeled("oracle predictor needs a labeled cloud".into()))?;
        Ok(OraclePredictor {
            labels: labels.to_vec(),
        })
    }

    /// Most frequent label; ties go to the smaller label.
    pub fn majority_label(&self, segment: &Segment) -> Result<Label> {
        majority_label(&self.labels, segment)
    }

    pub fn same_object(&self, a: &Segment, b: &Segment) -> Result<bool> {
        let la = self.majority_label(a)?;
        let lb = self.majority_label(b)?;
        Ok(la == lb && la != BACKGROUND)
    }
}

pub fn majority_label(labels: &[Label], segment: &Segment) -> Result<Label> {
    let mut counts: BTreeMap<Label, usize> = BTreeMap::new();
    for &i in segment.indices() {
        let l = *labels.get(i).ok_or(Error::IndexOutOfRange {
            index: i,
            len: labels.len(),
        })?;
        *counts.entry(l).or_default() += 1;
    }
    let mut best: Option<(Label, usize)> = None;
    for (l, c) in counts {
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((l, c));
        }
    }
    best.map(|(l, _)| l).ok_or(Error::EmptySegment(segment.id))
}

impl GroupingPredictor for OraclePredictor {
    fn predict(&self, _cloud: &LabeledCloud, a: &Segment, b: &Segment) -> Result<f64> {
        Ok(if self.same_object(a, b)? { 1.0 } else { 0.0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point3, SegmentId};

    fn cloud(labels: &[Label]) -> LabeledCloud {
        let pts = (0..labels.len()).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        LabeledCloud::new(pts, Some(labels.to_vec())).unwrap()
    }

    fn seg(id: u32, idx: impl IntoIterator<Item = usize>) -> Segment {
        Segment::new(SegmentId(id), idx).unwrap()
    }

    #[test]
    fn definition_examples() {
        let c = cloud(&[3, 3, 3, 7, 7, 3, 3, 3, 7, 7]);
        let o = OraclePredictor::new(&c).unwrap();
        assert_eq!(o.predict(&c, &seg(0, [0, 1]), &seg(1, [2, 5])).unwrap(), 1.0);
        assert_eq!(o.predict(&c, &seg(0, [0, 1]), &seg(1, [3, 4])).unwrap(), 0.0);
        // 60% object 3, 40% object 7
        assert_eq!(o.predict(&c, &seg(0, [0, 1, 2, 3, 4]), &seg(1, [6, 7])).unwrap(), 1.0);
    }

    #[test]
    fn ties_go_to_smaller_label_and_background_never_groups() {
        let c = cloud(&[5, 2, 0, 0, 4, 4]);
        let o = OraclePredictor::new(&c).unwrap();
        assert_eq!(o.majority_label(&seg(0, [0, 1])).unwrap(), 2);
        assert_eq!(o.predict(&c, &seg(0, [2]), &seg(1, [3])).unwrap(), 0.0);
        assert_eq!(o.predict(&c, &seg(0, [4]), &seg(1, [5])).unwrap(), 1.0);
    }

    #[test]
    fn requires_labels() {
        let c = LabeledCloud::unlabeled(vec![Point3::ORIGIN]).unwrap();
        assert!(matches!(OraclePredictor::new(&c), Err(Error::Unlabeled(_))));
    }
}
