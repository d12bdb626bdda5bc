use std::fmt;
use std::str::FromStr;

use crate::error::NameError;

/// Longest component representable in the one-byte length prefix of the wire form.
pub const MAX_COMPONENT_LEN: usize = 255;

/// Hierarchical content name. The root name `/` has no components and is
/// only meaningful as a route prefix.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Name {
    components: Vec<Box<[u8]>>,
}

impl Name {
    pub fn root() -> Self {
        Name::default()
    }

    pub fn from_components<I, C>(components: I) -> Result<Self, NameError>
    where
        I: IntoIterator<Item = C>,
        C: AsRef<[u8]>,
    {
        let mut out = Vec::new();
        for c in components {
            let c = c.as_ref();
            if c.is_empty() {
                return Err(NameError::EmptyComponent(String::from_utf8_lossy(c).into_owned()));
            }
            if c.len() > MAX_COMPONENT_LEN {
                return Err(NameError::ComponentTooLong(c.len()));
            }
            out.push(c.into());
        }
        Ok(Name { components: out })
    }

    /// Appends one component. Panics on an empty component, which is a
    /// programming error for the generated names used in scenarios.
    pub fn child(&self, component: impl AsRef<[u8]>) -> Name {
        let c = component.as_ref();
        assert!(!c.is_empty() && c.len() <= MAX_COMPONENT_LEN, "invalid component");
        let mut components = self.components.clone();
        components.push(c.into());
        Name { components }
    }

    /// Number of components; the root name has none, see [`Name::is_root`].
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_root(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> impl ExactSizeIterator<Item = &[u8]> {
        self.components.iter().map(|c| &c[..])
    }

    /// Component-wise prefix test.
    pub fn is_prefix_of(&self, name: &Name) -> bool {
        self.components.len() <= name.components.len()
            && self.components.iter().zip(&name.components).all(|(a, b)| a == b)
    }

    /// Bytes occupied by the name on the wire: one length byte per component
    /// plus the component bytes.
    pub fn wire_len(&self) -> usize {
        self.components.iter().map(|c| 1 + c.len()).sum()
    }

    pub fn encode_into(&self, buf: &mut Vec<u8>) {
        for c in &self.components {
            buf.push(c.len() as u8);
            buf.extend_from_slice(c);
        }
    }

    pub fn decode(mut bytes: &[u8]) -> Result<Name, NameError> {
        let mut components = Vec::new();
        while let Some((&len, rest)) = bytes.split_first() {
            let len = len as usize;
            if len == 0 || rest.len() < len {
                return Err(NameError::EmptyComponent(String::new()));
            }
            components.push(rest[..len].into());
            bytes = &rest[len..];
        }
        Ok(Name { components })
    }
}

/// True iff `prefix`'s components equal the leading components of `name`.
pub fn name_is_prefix(prefix: &Name, name: &Name) -> bool {
    prefix.is_prefix_of(name)
}

fn is_unreserved(b: u8) -> bool {
    b.is_ascii_alphanumeric() || matches!(b, b'-' | b'.' | b'_' | b'~')
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.components.is_empty() {
            return f.write_str("/");
        }
        for c in &self.components {
            f.write_str("/")?;
            for &b in c.iter() {
                if is_unreserved(b) {
                    write!(f, "{}", b as char)?;
                } else {
                    write!(f, "%{b:02X}")?;
                }
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Name({self})")
    }
}

fn percent_decode(text: &str, component: &str) -> Result<Vec<u8>, NameError> {
    let bytes = component.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = bytes
                .get(i + 1..i + 3)
                .and_then(|h| std::str::from_utf8(h).ok())
                .and_then(|h| u8::from_str_radix(h, 16).ok())
                .ok_or_else(|| NameError::BadEscape(text.to_owned()))?;
            out.push(hex);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    Ok(out)
}

impl FromStr for Name {
    type Err = NameError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let rest = text
            .strip_prefix('/')
            .ok_or_else(|| NameError::MissingLeadingSlash(text.to_owned()))?;
        if rest.is_empty() {
            return Ok(Name::root());
        }
        let mut components = Vec::new();
        for part in rest.split('/') {
            if part.is_empty() {
                return Err(NameError::EmptyComponent(text.to_owned()));
            }
            components.push(percent_decode(text, part)?);
        }
        Name::from_components(components)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn n(s: &str) -> Name {
        s.parse().unwrap()
    }

    #[test]
    fn prefix_is_component_wise() {
        assert!(name_is_prefix(&n("/data"), &n("/data/veh-3/17")));
        assert!(!name_is_prefix(&n("/data/veh-3"), &n("/data/veh-30")));
        assert!(name_is_prefix(&n("/a"), &n("/a")));
        assert!(name_is_prefix(&Name::root(), &n("/video/x")));
        assert!(!name_is_prefix(&n("/a/b"), &n("/a")));
    }

    #[test]
    fn wire_len_matches_text_for_plain_names() {
        assert_eq!(n("/data/veh-1/0").wire_len(), 13);
        assert_eq!(n("/data/shared/200").wire_len(), "/data/shared/200".len());
    }

    #[test]
    fn rejects_malformed_text() {
        assert!(matches!("data".parse::<Name>(), Err(NameError::MissingLeadingSlash(_))));
        assert!(matches!("/a//b".parse::<Name>(), Err(NameError::EmptyComponent(_))));
        assert!(matches!("/a/".parse::<Name>(), Err(NameError::EmptyComponent(_))));
        assert!(matches!("/a%zz".parse::<Name>(), Err(NameError::BadEscape(_))));
        assert!("/".parse::<Name>().unwrap().is_root());
    }

    #[test]
    fn escapes_reserved_bytes() {
        let name = Name::from_components([b"a/b".as_slice(), b"%"]).unwrap();
        assert_eq!(name.to_string(), "/a%2Fb/%25");
        assert_eq!(n(&name.to_string()), name);
    }

    proptest! {
        #[test]
        fn text_and_wire_round_trip(comps in prop::collection::vec(prop::collection::vec(any::<u8>(), 1..20), 1..6)) {
            let name = Name::from_components(&comps).unwrap();
            let text = name.to_string();
            prop_assert_eq!(&text.parse::<Name>().unwrap(), &name);
            prop_assert_eq!(text.parse::<Name>().unwrap().to_string(), text);
            let mut buf = Vec::new();
            name.encode_into(&mut buf);
            prop_assert_eq!(buf.len(), name.wire_len());
            prop_assert_eq!(Name::decode(&buf).unwrap(), name);
        }
    }
}
