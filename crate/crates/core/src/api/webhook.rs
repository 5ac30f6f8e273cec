//! `/sync` and `/finalize` payloads of the VNI endpoint.
//!
//! Request: `{"parent": {...}, "children": [...]}`.
//! Sync response: `{"children": [...], "status": {...}}`; finalize responses
//! additionally carry `"finalized": bool`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::{OwnerRef, Vni};

/// Annotation key that opts a job into VNI handling.
pub const VNI_ANNOTATION: &str = "vni";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ParentKind {
    Job,
    VniClaim,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ObjectMeta {
    pub namespace: String,
    pub name: String,
    #[serde(default)]
    pub annotations: BTreeMap<String, String>,
    #[serde(default)]
    pub deletion_requested: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParentObject {
    pub kind: ParentKind,
    pub metadata: ObjectMeta,
    #[serde(default)]
    pub spec: Value,
}

impl ParentObject {
    pub fn job(namespace: &str, name: &str, annotations: BTreeMap<String, String>) -> Self {
        Self {
            kind: ParentKind::Job,
            metadata: ObjectMeta {
                namespace: namespace.into(),
                name: name.into(),
                annotations,
                deletion_requested: false,
            },
            spec: Value::Null,
        }
    }

    pub fn claim(namespace: &str, name: &str) -> Self {
        Self {
            kind: ParentKind::VniClaim,
            metadata: ObjectMeta {
                namespace: namespace.into(),
                name: name.into(),
                annotations: BTreeMap::new(),
                deletion_requested: false,
            },
            spec: Value::Null,
        }
    }

    /// The owner reference this parent would use in the VNI database.
    pub fn owner_ref(&self) -> OwnerRef {
        match self.kind {
            ParentKind::Job => OwnerRef::job(&self.metadata.namespace, &self.metadata.name),
            ParentKind::VniClaim => OwnerRef::claim(&self.metadata.namespace, &self.metadata.name),
        }
    }
}

/// Child object describing one VNI bound to a parent. `owning == false`
/// marks a virtual instance that merely redeems a claim.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VniCrd {
    pub name: String,
    pub namespace: String,
    pub vni: Vni,
    pub owning: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claim_name: Option<String>,
}

impl VniCrd {
    /// Deterministic child name for a parent.
    pub fn child_name(parent_name: &str) -> String {
        format!("{parent_name}-vni")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyncRequest {
    pub parent: ParentObject,
    #[serde(default)]
    pub children: Vec<VniCrd>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SyncResponse {
    pub children: Vec<VniCrd>,
    #[serde(default)]
    pub status: BTreeMap<String, Value>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FinalizeResponse {
    pub children: Vec<VniCrd>,
    #[serde(default)]
    pub status: BTreeMap<String, Value>,
    pub finalized: bool,
}

/// What the `vni` annotation asks for.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum VniRequest {
    /// No annotation, or `vni: false`.
    Disabled,
    /// `vni: true`: the job owns a fresh VNI.
    PerResource,
    /// `vni: <claim-name>`: the job redeems a claim in its namespace.
    Claim(String),
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("malformed vni annotation {value:?}: {reason}")]
pub struct AnnotationError {
    pub value: String,
    pub reason: &'static str,
}

impl VniRequest {
    pub fn parse(value: &str) -> Result<Self, AnnotationError> {
        let malformed = |reason| AnnotationError {
            value: value.to_owned(),
            reason,
        };
        match value {
            "true" => Ok(VniRequest::PerResource),
            "false" => Ok(VniRequest::Disabled),
            "" => Err(malformed("empty value")),
            v if v.len() > 253 => Err(malformed("claim name longer than 253 characters")),
            v if !v
                .bytes()
                .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-' || b == b'.') =>
            {
                Err(malformed("claim name is not a DNS subdomain"))
            }
            v if !v.as_bytes()[0].is_ascii_alphanumeric()
                || !v.as_bytes()[v.len() - 1].is_ascii_alphanumeric() =>
            {
                Err(malformed("claim name must start and end with an alphanumeric"))
            }
            v => Ok(VniRequest::Claim(v.to_owned())),
        }
    }

    pub fn from_annotations(annotations: &BTreeMap<String, String>) -> Result<Self, AnnotationError> {
        match annotations.get(VNI_ANNOTATION) {
            None => Ok(VniRequest::Disabled),
            Some(v) => Self::parse(v),
        }
    }

    pub fn is_enabled(&self) -> bool {
        !matches!(self, VniRequest::Disabled)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annotation_grammar() {
        assert_eq!(VniRequest::parse("true"), Ok(VniRequest::PerResource));
        assert_eq!(VniRequest::parse("false"), Ok(VniRequest::Disabled));
        assert_eq!(
            VniRequest::parse("vni-claim-test"),
            Ok(VniRequest::Claim("vni-claim-test".into()))
        );
        assert!(VniRequest::parse("").is_err());
        assert!(VniRequest::parse("Bad_Name").is_err());
        assert!(VniRequest::parse("-lead").is_err());
        assert_eq!(
            VniRequest::from_annotations(&BTreeMap::new()),
            Ok(VniRequest::Disabled)
        );
    }

    #[test]
    fn sync_request_wire_format() {
        let body = r#"{"parent":{"kind":"Job","metadata":{"namespace":"vnitest","name":"vni-test-job","annotations":{"vni":"vni-claim-test"}}},"children":[]}"#;
        let req: SyncRequest = serde_json::from_str(body).unwrap();
        assert_eq!(req.parent.kind, ParentKind::Job);
        assert!(!req.parent.metadata.deletion_requested);
        assert_eq!(req.parent.owner_ref().as_str(), "job:vnitest/vni-test-job");
    }

    #[test]
    fn crd_omits_absent_claim() {
        let crd = VniCrd {
            name: "j-vni".into(),
            namespace: "ns".into(),
            vni: Vni(1024),
            owning: true,
            claim_name: None,
        };
        assert_eq!(
            serde_json::to_string(&crd).unwrap(),
            r#"{"name":"j-vni","namespace":"ns","vni":1024,"owning":true}"#
        );
    }
}
