//! CXI management socket: `POST /nodes/{node}/services`,
//! `DELETE /nodes/{node}/services/{id}`, `GET /nodes/{node}/services`.

use serde::{Deserialize, Serialize};

use crate::{MemberSpec, NodeId, Vni};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreateServiceRequest {
    pub member: MemberSpec,
    pub vnis: Vec<Vni>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_endpoints: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreateServiceResponse {
    pub id: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceView {
    pub id: u64,
    pub node: NodeId,
    pub member: MemberSpec,
    pub vnis: Vec<Vni>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_endpoints: Option<u64>,
    pub active_endpoints: u64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::MemberKind;

    #[test]
    fn create_request_wire_format() {
        let body = r#"{"member":{"kind":"netns","value":4026531840},"vnis":[1024]}"#;
        let req: CreateServiceRequest = serde_json::from_str(body).unwrap();
        assert_eq!(req.member.kind(), MemberKind::Netns);
        assert_eq!(req.member.value(), 4026531840);
        assert_eq!(req.vnis, vec![Vni(1024)]);
        assert_eq!(req.max_endpoints, None);
        assert_eq!(serde_json::to_string(&req).unwrap(), body);
    }
}
