use serde::de::Error as _;
use serde::ser::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

use super::PhotoError;
use crate::osm::FeatureCategory;

/// A landmark reported by the vision-language model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotoFeature {
    pub name: String,
    /// `(left, right)` degrees relative to the camera heading; negative is
    /// left of center.
    pub angle_span: (f64, f64),
    pub description: String,
    /// `(min, max)` meters from the camera.
    pub distance_range: (f64, f64),
    pub category: FeatureCategory,
}

impl PhotoFeature {
    pub fn new(
        name: impl Into<String>,
        angle_span: (f64, f64),
        description: impl Into<String>,
        distance_range: (f64, f64),
        category: FeatureCategory,
    ) -> Result<Self, PhotoError> {
        let f = Self {
            name: name.into(),
            angle_span,
            description: description.into(),
            distance_range,
            category,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<(), PhotoError> {
        let (l, r) = self.angle_span;
        let (dmin, dmax) = self.distance_range;
        if self.name.trim().is_empty() {
            return Err(PhotoError::InvalidFeature("empty name".into()));
        }
        if !(l.is_finite() && r.is_finite() && l < r && r - l <= 360.0) {
            return Err(PhotoError::InvalidFeature(format!("angle span ({l}, {r})")));
        }
        if !(dmin.is_finite() && dmax.is_finite() && dmin >= 0.0 && dmin < dmax) {
            return Err(PhotoError::InvalidFeature(format!("distance range ({dmin}, {dmax})")));
        }
        Ok(())
    }
}

/// Relative image coordinates, origin at the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub const FULL: BoundingBox = BoundingBox {
        x_min: 0.0,
        y_min: 0.0,
        x_max: 1.0,
        y_max: 1.0,
    };

    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, PhotoError> {
        let b = Self {
            x_min,
            y_min,
            x_max,
            y_max,
        };
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if [x_min, y_min, x_max, y_max].iter().all(|v| in_unit(*v)) && x_min < x_max && y_min < y_max {
            Ok(b)
        } else {
            Err(PhotoError::InvalidBox(format!("{:?}", b.to_array())))
        }
    }

    /// Clamps each coordinate into `[0, 1]` before validating.
    pub fn clamped(coords: [f64; 4]) -> Result<Self, PhotoError> {
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(PhotoError::InvalidBox(format!("{coords:?}")));
        }
        let c = coords.map(|v| v.clamp(0.0, 1.0));
        Self::new(c[0], c[1], c[2], c[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }

    pub fn contains(&self, other: &BoundingBox) -> bool {
        other.x_min >= self.x_min && other.y_min >= self.y_min && other.x_max <= self.x_max && other.y_max <= self.y_max
    }

    /// Largest absolute coordinate difference.
    pub fn max_delta(&self, other: &BoundingBox) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Coordinates rounded to the four decimals used on the wire.
    pub fn quantized(self) -> Self {
        let q = |v: f64| (v * 1e4).round() / 1e4;
        Self {
            x_min: q(self.x_min),
            y_min: q(self.y_min),
            x_max: q(self.x_max),
            y_max: q(self.y_max),
        }
    }

    /// `x_min,y_min,x_max,y_max` at four decimals.
    pub fn canonical_text(&self) -> String {
        self.to_array().map(fixed4).join(",")
    }
}

/// Four-decimal fixed point; never emits `-0.0000`.
pub(crate) fn fixed4(v: f64) -> String {
    let s = format!("{v:.4}");
    if s == "-0.0000" {
        "0.0000".into()
    } else {
        s
    }
}

impl Serialize for BoundingBox {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let text = format!("[{}]", self.to_array().map(fixed4).join(", "));
        let raw = RawValue::from_string(text).map_err(S::Error::custom)?;
        raw.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BoundingBox {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let a = <[f64; 4]>::deserialize(deserializer)?;
        BoundingBox::new(a[0], a[1], a[2], a[3]).map_err(D::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modified {
    Yes,
    No,
}

/// A label and its box, as returned by grounding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledBox {
    pub label: String,
    pub bounding_box: BoundingBox,
}

/// Verdict of the box-fixing pass on a draft box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixDecision {
    pub label: String,
    pub modified: Modified,
    pub bounding_box: BoundingBox,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamp_rule() {
        let b = BoundingBox::clamped([-0.01, 0.0, 0.5, 1.02]).unwrap();
        assert_eq!(b.to_array(), [0.0, 0.0, 0.5, 1.0]);
        assert!(BoundingBox::clamped([0.5, 0.0, 0.5, 1.0]).is_err());
        assert!(BoundingBox::clamped([f64::NAN, 0.0, 0.5, 1.0]).is_err());
    }

    #[test]
    fn serializes_at_four_decimals() {
        let b = BoundingBox::new(0.0, 0.0, 0.6200001, 1.0).unwrap();
        assert_eq!(serde_json::to_string(&b).unwrap(), "[0.0000, 0.0000, 0.6200, 1.0000]");
        let back: BoundingBox = serde_json::from_str("[0.0000, 0.0000, 0.6200, 1.0000]").unwrap();
        assert_eq!(back, b.quantized());
    }

    #[test]
    fn feature_invariants() {
        let ok = PhotoFeature::new("X", (-10.0, 10.0), "", (5.0, 20.0), FeatureCategory::Road);
        assert!(ok.is_ok());
        assert!(PhotoFeature::new("X", (10.0, -10.0), "", (5.0, 20.0), FeatureCategory::Road).is_err());
        assert!(PhotoFeature::new("X", (-10.0, 10.0), "", (20.0, 20.0), FeatureCategory::Road).is_err());
        assert!(PhotoFeature::new(" ", (-10.0, 10.0), "", (5.0, 20.0), FeatureCategory::Road).is_err());
    }
}
