use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{ConvexBody, InnerNorm, Shape};
use crate::error::{Error, Result};

/// Serializable description of a body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BodySpec {
    Ellipsoid {
        semi_axes: Vec<f64>,
    },
    Box {
        half_widths: Vec<f64>,
    },
    Pball {
        dim: usize,
        p: f64,
        radius: f64,
    },
    /// `matrix` is `rows × cols`, row-major.
    NormImage {
        rows: usize,
        cols: usize,
        matrix: Vec<f64>,
        inner_norm: InnerNorm,
    },
    Intersection {
        base: Box<BodySpec>,
        radius: f64,
    },
}

impl BodySpec {
    pub fn build(&self) -> Result<ConvexBody> {
        match self {
            BodySpec::Ellipsoid { semi_axes } => ConvexBody::ellipsoid(semi_axes.clone()),
            BodySpec::Box { half_widths } => ConvexBody::hyperrectangle(half_widths.clone()),
            BodySpec::Pball { dim, p, radius } => ConvexBody::p_ball(*dim, *p, *radius),
            BodySpec::NormImage {
                rows,
                cols,
                matrix,
                inner_norm,
            } => {
                if matrix.len() != rows * cols {
                    return Err(Error::invalid(format!(
                        "norm-image matrix declares {rows}x{cols} but holds {} entries",
                        matrix.len()
                    )));
                }
                ConvexBody::norm_image(DMatrix::from_row_slice(*rows, *cols, matrix), *inner_norm)
            }
            BodySpec::Intersection { base, radius } => base.build()?.intersect_ball(*radius),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("body description: {e}")))
    }
}

impl TryFrom<&ConvexBody> for BodySpec {
    type Error = Error;

    fn try_from(body: &ConvexBody) -> Result<Self> {
        Ok(match body.shape() {
            Shape::Ellipsoid(e) if e.basis().is_none() => BodySpec::Ellipsoid {
                semi_axes: e.semi_axes().to_vec(),
            },
            Shape::Box(h) => BodySpec::Box {
                half_widths: h.clone(),
            },
            Shape::PBall { p, radius } => BodySpec::Pball {
                dim: body.dim(),
                p: *p,
                radius: *radius,
            },
            Shape::NormImage { matrix, inner } => BodySpec::NormImage {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
                matrix: crate::linalg::MatrixRecord::from_matrix(matrix).data,
                inner_norm: *inner,
            },
            Shape::Intersection { base, radius } => BodySpec::Intersection {
                base: Box::new(BodySpec::try_from(base.as_ref())?),
                radius: *radius,
            },
            _ => return Err(Error::invalid("body has no serializable description")),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_uses_kind_tag() {
        let spec = BodySpec::Intersection {
            base: Box::new(BodySpec::NormImage {
                rows: 2,
                cols: 2,
                matrix: vec![1.0, 0.0, 0.0, 2.0],
                inner_norm: InnerNorm::Lp { p: 4.0 },
            }),
            radius: 0.75,
        };
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"kind\":\"intersection\""));
        assert!(json.contains("\"kind\":\"norm_image\""));
        let back = BodySpec::from_json(&json).unwrap();
        assert_eq!(back, spec);
        let body = back.build().unwrap();
        assert_eq!(BodySpec::try_from(&body).unwrap(), spec);
    }

    #[test]
    fn parses_hand_written_specs() {
        let e = BodySpec::from_json(r#"{"kind":"ellipsoid","semi_axes":[2,1]}"#)
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(e.dim(), 2);
        let b = BodySpec::from_json(r#"{"kind":"box","half_widths":[1,1,1]}"#)
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(b.dim(), 3);
        let p = BodySpec::from_json(r#"{"kind":"pball","dim":4,"p":3,"radius":1}"#).unwrap();
        assert!(p.build().is_ok());
    }

    #[test]
    fn validation_errors() {
        for bad in [
            r#"{"kind":"ellipsoid","semi_axes":[2,0]}"#,
            r#"{"kind":"pball","dim":4,"p":1.5,"radius":1}"#,
            r#"{"kind":"norm_image","rows":2,"cols":2,"matrix":[1,1,1,1],"inner_norm":{"norm":"linf"}}"#,
            r#"{"kind":"sphere"}"#,
        ] {
            let res = BodySpec::from_json(bad).and_then(|s| s.build());
            assert!(matches!(res, Err(Error::InvalidInput(_))), "{bad}");
        }
    }
}
