//! The two face flavors: native faces that put NDN packets straight onto the
//! link, and overlay faces that tunnel them hop-by-hop in UDP/IPv4.

use std::net::{Ipv4Addr, SocketAddrV4};

use rustc_hash::FxHashMap as HashMap;

use crate::error::{SetupError, WireError};
use crate::mac::{Dest, Frame, Medium, NodeId, Service};
use crate::ndn::{FaceId, FaceKind, ForwarderState, Name, Packet};

/// 802.11 MAC header (24) + LLC/SNAP (8) + FCS (4).
pub const LINK_HEADER_LEN: usize = 36;
/// IPv4 (20) + UDP (8).
pub const UDP_IPV4_OVERHEAD: usize = 28;
pub const NDN_UDP_PORT: u16 = 6363;

const ETHERTYPE_NDN: u16 = 0x8624;
const ETHERTYPE_IPV4: u16 = 0x0800;

/// How an NDN packet is wrapped inside a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Encap {
    Native,
    Udp { src: SocketAddrV4, dst: SocketAddrV4 },
}

impl Encap {
    pub fn overhead(&self) -> usize {
        LINK_HEADER_LEN
            + match self {
                Encap::Native => 0,
                Encap::Udp { .. } => UDP_IPV4_OVERHEAD,
            }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Attachment {
    Wireless,
    PointToPoint { peer: NodeId },
}

impl Attachment {
    fn medium(self) -> Medium {
        match self {
            Attachment::Wireless => Medium::Wireless,
            Attachment::PointToPoint { .. } => Medium::PointToPoint,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NativeLinkFace {
    pub node: NodeId,
    pub attachment: Attachment,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlayTunnelFace {
    pub node: NodeId,
    pub local: SocketAddrV4,
    pub remote: SocketAddrV4,
    /// Link address of `remote`, resolved when the tunnel was created.
    pub remote_link: NodeId,
    pub attachment: Attachment,
}

/// IPv4 to link-address bindings, populated at install time.
#[derive(Debug, Clone, Default)]
pub struct AddressTable {
    bindings: HashMap<Ipv4Addr, NodeId>,
}

impl AddressTable {
    pub fn bind(&mut self, ip: Ipv4Addr, node: NodeId) -> Result<(), SetupError> {
        if self.bindings.insert(ip, node).is_some() {
            return Err(SetupError::DuplicateAddress(ip));
        }
        Ok(())
    }

    pub fn resolve(&self, ip: Ipv4Addr) -> Result<NodeId, SetupError> {
        self.bindings.get(&ip).copied().ok_or(SetupError::Unresolvable(ip))
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }
}

fn frame_for(
    node: NodeId,
    attachment: Attachment,
    dest_on_air: Dest,
    service: Service,
    encap: Encap,
    packet: Packet,
) -> Frame {
    let bytes = (packet.wire_len() + encap.overhead()) as u32;
    let dest = match attachment {
        Attachment::Wireless => dest_on_air,
        Attachment::PointToPoint { peer } => Dest::Node(peer),
    };
    Frame {
        src: node,
        dest,
        service,
        medium: attachment.medium(),
        bytes,
        encap,
        payload: packet,
    }
}

/// Native faces have no link-layer address resolution, so every wireless
/// send is a basic-service broadcast.
pub fn native_send(face: &NativeLinkFace, packet: Packet) -> Frame {
    frame_for(
        face.node,
        face.attachment,
        Dest::Broadcast,
        Service::Basic,
        Encap::Native,
        packet,
    )
}

pub fn overlay_send(face: &OverlayTunnelFace, packet: Packet) -> Frame {
    frame_for(
        face.node,
        face.attachment,
        Dest::Node(face.remote_link),
        Service::Full,
        Encap::Udp {
            src: face.local,
            dst: face.remote,
        },
        packet,
    )
}

/// Link-layer address of a simulated node.
pub fn link_addr(node: Option<NodeId>) -> [u8; 6] {
    match node {
        None => [0xff; 6],
        Some(n) => {
            let n = n as u32;
            [0x02, 0x00, (n >> 24) as u8, (n >> 16) as u8, (n >> 8) as u8, n as u8]
        }
    }
}

fn node_of(addr: &[u8]) -> Option<NodeId> {
    if addr == [0xff; 6] {
        None
    } else {
        Some(u32::from_be_bytes([addr[2], addr[3], addr[4], addr[5]]) as NodeId)
    }
}

fn crc32(bytes: &[u8]) -> u32 {
    let mut crc = !0u32;
    for &b in bytes {
        crc ^= b as u32;
        for _ in 0..8 {
            crc = if crc & 1 != 0 {
                (crc >> 1) ^ 0xEDB8_8320
            } else {
                crc >> 1
            };
        }
    }
    !crc
}

fn ipv4_checksum(header: &[u8]) -> u16 {
    let mut sum: u32 = header.chunks(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as u32).sum();
    while sum > 0xffff {
        sum = (sum & 0xffff) + (sum >> 16);
    }
    !(sum as u16)
}

/// Serializes a frame: link header, optional IPv4/UDP headers, NDN packet, FCS.
pub fn encapsulate(frame: &Frame) -> Vec<u8> {
    let mut buf = Vec::with_capacity(frame.bytes as usize);
    let dest = match frame.dest {
        Dest::Broadcast => None,
        Dest::Node(n) => Some(n),
    };
    // Frame control: data frame; duration is left zero.
    buf.extend_from_slice(&[0x08, 0x00, 0x00, 0x00]);
    buf.extend_from_slice(&link_addr(dest));
    buf.extend_from_slice(&link_addr(Some(frame.src)));
    buf.extend_from_slice(&link_addr(Some(frame.src)));
    buf.extend_from_slice(&[0x00, 0x00]);
    buf.extend_from_slice(&[0xaa, 0xaa, 0x03, 0x00, 0x00, 0x00]);
    let ndn = frame.payload.encode();
    match frame.encap {
        Encap::Native => {
            buf.extend_from_slice(&ETHERTYPE_NDN.to_be_bytes());
        }
        Encap::Udp { src, dst } => {
            buf.extend_from_slice(&ETHERTYPE_IPV4.to_be_bytes());
            let udp_len = (8 + ndn.len()) as u16;
            let total = 20 + udp_len;
            let mut ip = [0u8; 20];
            ip[0] = 0x45;
            ip[2..4].copy_from_slice(&total.to_be_bytes());
            ip[8] = 64;
            ip[9] = 17;
            ip[12..16].copy_from_slice(&src.ip().octets());
            ip[16..20].copy_from_slice(&dst.ip().octets());
            let cksum = ipv4_checksum(&ip);
            ip[10..12].copy_from_slice(&cksum.to_be_bytes());
            buf.extend_from_slice(&ip);
            buf.extend_from_slice(&src.port().to_be_bytes());
            buf.extend_from_slice(&dst.port().to_be_bytes());
            buf.extend_from_slice(&udp_len.to_be_bytes());
            // UDP checksum is optional over IPv4.
            buf.extend_from_slice(&[0, 0]);
        }
    }
    buf.extend_from_slice(&ndn);
    let fcs = crc32(&buf);
    buf.extend_from_slice(&fcs.to_le_bytes());
    buf
}

/// Inverse of [`encapsulate`] for wireless frames.
pub fn decapsulate(bytes: &[u8], service: Service, medium: Medium) -> Result<Frame, WireError> {
    if bytes.len() < LINK_HEADER_LEN {
        return Err(WireError::Truncated {
            need: LINK_HEADER_LEN,
            have: bytes.len(),
        });
    }
    let (body, fcs) = bytes.split_at(bytes.len() - 4);
    if crc32(body) != u32::from_le_bytes(fcs.try_into().unwrap()) {
        return Err(WireError::Malformed("frame check sequence"));
    }
    let dest = match node_of(&body[4..10]) {
        None => Dest::Broadcast,
        Some(n) => Dest::Node(n),
    };
    let src = node_of(&body[10..16]).ok_or(WireError::Malformed("source address"))?;
    let ethertype = u16::from_be_bytes([body[30], body[31]]);
    let rest = &body[32..];
    let (encap, ndn) = match ethertype {
        ETHERTYPE_NDN => (Encap::Native, rest),
        ETHERTYPE_IPV4 => {
            if rest.len() < UDP_IPV4_OVERHEAD {
                return Err(WireError::Truncated {
                    need: UDP_IPV4_OVERHEAD,
                    have: rest.len(),
                });
            }
            let ip = &rest[..20];
            if ip[0] != 0x45 || ip[9] != 17 || ipv4_checksum(ip) != 0 {
                return Err(WireError::Malformed("ipv4 header"));
            }
            let udp = &rest[20..28];
            let addr = |o: &[u8], p: &[u8]| {
                SocketAddrV4::new(Ipv4Addr::new(o[0], o[1], o[2], o[3]), u16::from_be_bytes([p[0], p[1]]))
            };
            let encap = Encap::Udp {
                src: addr(&ip[12..16], &udp[0..2]),
                dst: addr(&ip[16..20], &udp[2..4]),
            };
            (encap, &rest[28..])
        }
        _ => return Err(WireError::Malformed("ethertype")),
    };
    let payload = Packet::decode(ndn)?;
    Ok(Frame {
        src,
        dest,
        service,
        medium,
        bytes: bytes.len() as u32,
        encap,
        payload,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Deployment {
    Native,
    Overlay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Router,
    Producer,
    Vehicle(usize),
}

/// Router, producer and vehicles in a star: vehicles share the wireless
/// channel with the router, the router reaches the producer over a
/// point-to-point link.
#[derive(Debug, Clone)]
pub struct Topology {
    pub vehicles: usize,
}

impl Topology {
    pub const ROUTER: NodeId = 0;
    pub const PRODUCER: NodeId = 1;

    pub fn new(vehicles: usize) -> Self {
        Topology { vehicles }
    }

    pub fn node_count(&self) -> usize {
        2 + self.vehicles
    }

    pub fn vehicle_node(&self, vehicle: usize) -> NodeId {
        2 + vehicle
    }

    pub fn role(&self, node: NodeId) -> Role {
        match node {
            Self::ROUTER => Role::Router,
            Self::PRODUCER => Role::Producer,
            n => Role::Vehicle(n - 2),
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        0..self.node_count()
    }

    fn wireless_ip(&self, node: NodeId) -> Ipv4Addr {
        // 10.0.0.0/16: router 10.0.0.1, vehicles from 10.0.0.2.
        let host = if node == Self::ROUTER { 1 } else { node as u32 };
        Ipv4Addr::from(u32::from(Ipv4Addr::new(10, 0, 0, 0)) + host)
    }

    fn backbone_ip(&self, node: NodeId) -> Ipv4Addr {
        if node == Self::ROUTER {
            Ipv4Addr::new(10, 1, 0, 1)
        } else {
            Ipv4Addr::new(10, 1, 0, 2)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FaceTransport {
    Application,
    Native(NativeLinkFace),
    Overlay(OverlayTunnelFace),
}

/// A node's forwarder together with the transports behind its faces.
#[derive(Debug)]
pub struct NodeStack {
    pub node: NodeId,
    pub role: Role,
    pub forwarder: ForwarderState,
    pub app_face: Option<FaceId>,
    transports: Vec<(FaceId, FaceTransport)>,
    tunnels: HashMap<(SocketAddrV4, SocketAddrV4), FaceId>,
    next_port: u16,
}

impl NodeStack {
    pub fn new(node: NodeId, role: Role, cs_capacity: usize) -> Self {
        NodeStack {
            node,
            role,
            forwarder: ForwarderState::new(cs_capacity),
            app_face: None,
            transports: Vec::new(),
            tunnels: HashMap::default(),
            next_port: NDN_UDP_PORT,
        }
    }

    fn add(&mut self, transport: FaceTransport) -> FaceId {
        let kind = match &transport {
            FaceTransport::Application => FaceKind::Application,
            FaceTransport::Native(f) => match f.attachment {
                Attachment::Wireless => FaceKind::NativeLink,
                Attachment::PointToPoint { .. } => FaceKind::PointToPoint,
            },
            FaceTransport::Overlay(_) => FaceKind::OverlayTunnel,
        };
        let id = self.forwarder.add_face(kind);
        if let FaceTransport::Overlay(t) = &transport {
            self.tunnels.insert((t.remote, t.local), id);
        }
        self.transports.push((id, transport));
        id
    }

    pub fn add_app_face(&mut self) -> FaceId {
        let id = self.add(FaceTransport::Application);
        self.app_face = Some(id);
        id
    }

    pub fn transport(&self, face: FaceId) -> Option<&FaceTransport> {
        self.transports.iter().find(|(f, _)| *f == face).map(|(_, t)| t)
    }

    pub fn faces(&self) -> impl Iterator<Item = (FaceId, &FaceTransport)> {
        self.transports.iter().map(|(f, t)| (*f, t))
    }

    pub fn tunnel_count(&self) -> usize {
        self.tunnels.len()
    }

    /// The face on which an incoming frame arrives.
    pub fn ingress_face(&self, frame: &Frame) -> Option<FaceId> {
        match frame.encap {
            Encap::Udp { src, dst } => self.tunnels.get(&(src, dst)).copied(),
            Encap::Native => self.transports.iter().find_map(|(id, t)| match t {
                FaceTransport::Native(f) if f.attachment.medium() == frame.medium => Some(*id),
                _ => None,
            }),
        }
    }

    /// Wraps `packet` for transmission on `face`. Application faces return `None`.
    pub fn send(&self, face: FaceId, packet: Packet) -> Option<Frame> {
        match self.transport(face)? {
            FaceTransport::Application => None,
            FaceTransport::Native(f) => Some(native_send(f, packet)),
            FaceTransport::Overlay(t) => Some(overlay_send(t, packet)),
        }
    }

    fn alloc_port(&mut self) -> u16 {
        let p = self.next_port;
        self.next_port += 1;
        p
    }
}

/// Installs faces on every node of the topology. Overlay deployments also
/// assign IPv4 addresses and create one tunnel pair per hop.
pub fn install_stacks(
    topology: &Topology,
    deployment: Deployment,
    cs_capacity: impl Fn(Role) -> usize,
) -> Result<(Vec<NodeStack>, AddressTable), SetupError> {
    let mut stacks: Vec<NodeStack> = topology
        .nodes()
        .map(|n| {
            let role = topology.role(n);
            NodeStack::new(n, role, cs_capacity(role))
        })
        .collect();
    let mut addresses = AddressTable::default();
    for n in topology.nodes() {
        install_stack(topology, &mut stacks, &mut addresses, n, deployment)?;
    }
    Ok((stacks, addresses))
}

/// Installs the faces owned by `node`. For overlay deployments the node's
/// tunnel toward its gateway peer is created along with the reverse face at
/// the peer (vehicle to router, router to producer).
pub fn install_stack(
    topology: &Topology,
    stacks: &mut [NodeStack],
    addresses: &mut AddressTable,
    node: NodeId,
    deployment: Deployment,
) -> Result<(), SetupError> {
    let role = topology.role(node);
    if !matches!(role, Role::Router) {
        stacks[node].add_app_face();
    }
    match deployment {
        Deployment::Native => {
            let attachments: &[Attachment] = match role {
                Role::Vehicle(_) => &[Attachment::Wireless],
                Role::Router => &[
                    Attachment::Wireless,
                    Attachment::PointToPoint {
                        peer: Topology::PRODUCER,
                    },
                ],
                Role::Producer => &[Attachment::PointToPoint { peer: Topology::ROUTER }],
            };
            for &attachment in attachments {
                stacks[node].add(FaceTransport::Native(NativeLinkFace { node, attachment }));
            }
        }
        Deployment::Overlay => match role {
            Role::Vehicle(_) => {
                addresses.bind(topology.wireless_ip(node), node)?;
                create_tunnel(
                    topology,
                    stacks,
                    addresses,
                    node,
                    Topology::ROUTER,
                    Attachment::Wireless,
                )?;
            }
            Role::Router => {
                addresses.bind(topology.wireless_ip(node), node)?;
                addresses.bind(topology.backbone_ip(node), node)?;
            }
            Role::Producer => {
                addresses.bind(topology.backbone_ip(node), node)?;
                create_tunnel(
                    topology,
                    stacks,
                    addresses,
                    Topology::ROUTER,
                    node,
                    Attachment::PointToPoint {
                        peer: Topology::PRODUCER,
                    },
                )?;
            }
        },
    }
    Ok(())
}

fn create_tunnel(
    topology: &Topology,
    stacks: &mut [NodeStack],
    addresses: &AddressTable,
    a: NodeId,
    b: NodeId,
    attachment: Attachment,
) -> Result<(), SetupError> {
    let ip = |n: NodeId| match attachment {
        Attachment::Wireless => topology.wireless_ip(n),
        Attachment::PointToPoint { .. } => topology.backbone_ip(n),
    };
    let (ip_a, ip_b) = (ip(a), ip(b));
    let link_b = addresses.resolve(ip_b)?;
    let link_a = addresses.resolve(ip_a)?;
    let end_a = SocketAddrV4::new(ip_a, stacks[a].alloc_port());
    let end_b = SocketAddrV4::new(ip_b, stacks[b].alloc_port());
    let attach_toward = |peer: NodeId| match attachment {
        Attachment::Wireless => Attachment::Wireless,
        Attachment::PointToPoint { .. } => Attachment::PointToPoint { peer },
    };
    stacks[a].add(FaceTransport::Overlay(OverlayTunnelFace {
        node: a,
        local: end_a,
        remote: end_b,
        remote_link: link_b,
        attachment: attach_toward(b),
    }));
    stacks[b].add(FaceTransport::Overlay(OverlayTunnelFace {
        node: b,
        local: end_b,
        remote: end_a,
        remote_link: link_a,
        attachment: attach_toward(a),
    }));
    Ok(())
}

/// Served prefix of the single producer.
pub fn data_prefix() -> Name {
    Name::from_components(["data"]).expect("static name")
}

/// Fills every FIB: vehicles default-route toward the router, the router
/// routes the producer prefix upstream and the producer registers it on its
/// application face.
pub fn build_routes(topology: &Topology, stacks: &mut [NodeStack]) -> Result<(), SetupError> {
    for n in topology.nodes() {
        let stack = &mut stacks[n];
        let upstream = stack.faces().find_map(|(id, t)| match (stack.role, t) {
            (Role::Vehicle(_), FaceTransport::Native(_) | FaceTransport::Overlay(_)) => Some(id),
            (Role::Router, FaceTransport::Native(f)) if f.attachment != Attachment::Wireless => Some(id),
            (Role::Router, FaceTransport::Overlay(t)) if t.remote_link == Topology::PRODUCER => Some(id),
            (Role::Producer, FaceTransport::Application) => Some(id),
            _ => None,
        });
        let upstream = upstream.ok_or(SetupError::Unattached(n))?;
        let prefix = match stack.role {
            Role::Vehicle(_) => Name::root(),
            Role::Router | Role::Producer => data_prefix(),
        };
        stack.forwarder.fib.insert(prefix, upstream);
    }
    Ok(())
}
