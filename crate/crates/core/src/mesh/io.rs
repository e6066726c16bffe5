/// Vertex coordinates written with 17 significant digits so that a mesh
/// survives a JSON round trip bit for bit.
pub(crate) mod precise_vertices {
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};
    use serde_json::value::RawValue;

    pub fn serialize<S: Serializer>(verts: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(verts.len()))?;
        for v in verts {
            let body: Vec<String> = v.iter().map(|x| format!("{x:.16e}")).collect();
            let raw = RawValue::from_string(format!("[{}]", body.join(", "))).map_err(serde::ser::Error::custom)?;
            seq.serialize_element(&raw)?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
        Vec::<Vec<f64>>::deserialize(d)
    }
}

#[cfg(test)]
mod tests {
    use crate::mesh::{generate_domain, DomainSpec, SimplicialMesh};

    #[test]
    fn json_round_trip_is_exact() {
        let m = generate_domain(&DomainSpec::cap(2, 1.0, 2)).unwrap();
        let text = m.to_json().unwrap();
        let back = SimplicialMesh::from_json(&text).unwrap();
        assert_eq!(m, back);
    }
}
