use serde::{Deserialize, Serialize};

use super::{SymTensor2, SymTensor4};
use crate::error::{Error, Result};

/// On-disk tensor form.
///
/// `{"order":2,"voigt":[a11,a22,a33,a23,a13,a12]}` or
/// `{"order":4,"voigt6x6":[[...],...]}`. Fourth-order entries are plain
/// `T_ijkl` values in Voigt order, without Mandel factors or any global prefactor.
#[derive(Clone, Debug, PartialEq)]
pub enum TensorJson {
    Order2(SymTensor2),
    Order4(SymTensor4),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Raw {
    order: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    voigt: Option<[f64; 6]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    voigt6x6: Option<[[f64; 6]; 6]>,
}

impl TensorJson {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: Raw = serde_json::from_str(text).map_err(|e| Error::Json(e.to_string()))?;
        match (raw.order, raw.voigt, raw.voigt6x6) {
            (2, Some(v), None) => {
                if !v.iter().all(|x| x.is_finite()) {
                    return Err(Error::validation("tensor has non-finite components"));
                }
                Ok(TensorJson::Order2(SymTensor2(v)))
            }
            (4, None, Some(m)) => {
                if !m.iter().flatten().all(|x| x.is_finite()) {
                    return Err(Error::validation("tensor has non-finite components"));
                }
                Ok(TensorJson::Order4(SymTensor4::from_voigt(m)?))
            }
            (o, _, _) => Err(Error::validation(format!(
                "tensor JSON needs order 2 with \"voigt\" or order 4 with \"voigt6x6\" (got order {o})"
            ))),
        }
    }

    pub fn to_json_string(&self) -> String {
        let raw = match self {
            TensorJson::Order2(a) => Raw { order: 2, voigt: Some(a.0), voigt6x6: None },
            TensorJson::Order4(t) => Raw { order: 4, voigt: None, voigt6x6: Some(t.0) },
        };
        serde_json::to_string_pretty(&raw).expect("tensor serialization")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_both_orders() {
        let a = TensorJson::Order2(SymTensor2::new(1.0, 2.0, 3.0, 0.1, 0.2, 0.3));
        assert_eq!(TensorJson::parse(&a.to_json_string()).unwrap(), a);
        let t = TensorJson::Order4(SymTensor2::new(1.0, 2.0, 3.0, 0.1, 0.2, 0.3).self_outer());
        assert_eq!(TensorJson::parse(&t.to_json_string()).unwrap(), t);
    }

    #[test]
    fn rejects_mismatched_order() {
        assert!(TensorJson::parse(r#"{"order":4,"voigt":[1,2,3,0,0,0]}"#).is_err());
        assert!(TensorJson::parse(r#"{"order":3}"#).is_err());
    }

    #[test]
    fn rejects_asymmetric_matrix() {
        let mut m = [[0.0; 6]; 6];
        m[0][1] = 1.0;
        let text = serde_json::json!({"order": 4, "voigt6x6": m}).to_string();
        assert!(matches!(TensorJson::parse(&text), Err(Error::Validation(_))));
    }
}
