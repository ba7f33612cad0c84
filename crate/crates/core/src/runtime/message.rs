use std::fmt;

/// Wire message kinds. The tag costs [`TAG_BITS`] bits on the wire: four
/// for the kind and four for the subtype of a `Control` message, whose
/// first field is that subtype rather than payload.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MessageKind {
    Progress,
    Rotation,
    Verify,
    Verified,
    BuildBridge,
    Renumber,
    LeaderProbe,
    BfsExplore,
    EdgeRecord,
    HcAssign,
    SizeReport,
    Control,
}

pub const TAG_BITS: u32 = 8;
/// Exclusive bound on `Control` subtypes.
pub const SUBTYPES: u32 = 16;
pub const MAX_FIELDS: usize = 4;

impl MessageKind {
    pub fn name(self) -> &'static str {
        match self {
            MessageKind::Progress => "progress",
            MessageKind::Rotation => "rotation",
            MessageKind::Verify => "verify",
            MessageKind::Verified => "verified",
            MessageKind::BuildBridge => "build_bridge",
            MessageKind::Renumber => "renumber",
            MessageKind::LeaderProbe => "leader_probe",
            MessageKind::BfsExplore => "bfs_explore",
            MessageKind::EdgeRecord => "edge_record",
            MessageKind::HcAssign => "hc_assign",
            MessageKind::SizeReport => "size_report",
            MessageKind::Control => "control",
        }
    }
}

/// A message of at most four integer fields.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Message {
    kind: MessageKind,
    arity: u8,
    payload: [u32; MAX_FIELDS],
}

impl Message {
    /// Panics if more than four fields are given.
    pub fn new(kind: MessageKind, fields: &[u32]) -> Message {
        assert!(fields.len() <= MAX_FIELDS, "a message carries at most {MAX_FIELDS} fields");
        let mut payload = [0; MAX_FIELDS];
        payload[..fields.len()].copy_from_slice(fields);
        Message { kind, arity: fields.len() as u8, payload }
    }

    pub fn kind(&self) -> MessageKind {
        self.kind
    }

    pub fn fields(&self) -> &[u32] {
        &self.payload[..self.arity as usize]
    }

    /// Field `i`, or 0 when the message is shorter.
    #[inline]
    pub fn field(&self, i: usize) -> u32 {
        if i < self.arity as usize {
            self.payload[i]
        } else {
            0
        }
    }

    pub fn arity(&self) -> usize {
        self.arity as usize
    }

    /// Fields charged as payload (all but a `Control` subtype).
    pub fn payload_len(&self) -> usize {
        match self.kind {
            MessageKind::Control => self.arity().saturating_sub(1),
            _ => self.arity(),
        }
    }

    /// Size on the wire for a network of `n` nodes.
    pub fn size_bits(&self, n: usize) -> u32 {
        TAG_BITS + self.payload_len() as u32 * field_bits(n)
    }

    /// Whether every payload field is at most `n` and a `Control` subtype
    /// fits its tag bits.
    pub fn fits(&self, n: usize) -> bool {
        let skip = self.arity() - self.payload_len();
        if skip == 1 && self.payload[0] >= SUBTYPES {
            return false;
        }
        self.fields()[skip..].iter().all(|&f| f as usize <= n)
    }
}

impl fmt::Debug for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:?}", self.kind.name(), self.fields())
    }
}

/// Bits per integer field: `⌈log₂ n⌉`, at least 1. Fields hold ids
/// `0..n` or counts and positions `1..=n` (stored offset by one).
pub fn field_bits(n: usize) -> u32 {
    if n <= 2 {
        1
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

/// Capacity of one CONGEST slot: the tag plus four fields.
pub fn bandwidth_bits(n: usize) -> u32 {
    TAG_BITS + MAX_FIELDS as u32 * field_bits(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        assert_eq!(field_bits(1), 1);
        assert_eq!(field_bits(2), 1);
        assert_eq!(field_bits(3), 2);
        assert_eq!(field_bits(1024), 10);
        assert_eq!(field_bits(1025), 11);
        assert_eq!(field_bits(4096), 12);
        let m = Message::new(MessageKind::Rotation, &[5, 2]);
        assert_eq!(m.size_bits(4096), 8 + 24);
        assert_eq!(bandwidth_bits(4096), 8 + 48);
        assert!(m.fits(5));
        assert!(!m.fits(4));
        let c = Message::new(MessageKind::Control, &[9, 3]);
        assert_eq!(c.payload_len(), 1);
        assert_eq!(c.size_bits(4096), 8 + 12);
        assert!(c.fits(3));
        assert!(!Message::new(MessageKind::Control, &[16]).fits(100));
        assert_eq!(m.fields(), &[5, 2]);
        assert_eq!(m.field(3), 0);
    }

    #[test]
    #[should_panic]
    fn too_many_fields() {
        Message::new(MessageKind::Control, &[1, 2, 3, 4, 5]);
    }
}
