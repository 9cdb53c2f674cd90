"""Preimage bubbles of the Siegel disk and the quadratic-model transfer.

A bubble is a connected component of f^{-n}(D) for the Siegel disk D; the
attached ones chain up into a tree rooted at D.  Addresses record the chain
combinatorics: the entry n_j >= 0 picks the joint sitting at the n_j-th
backward boundary-orbit point of the critical point on the previous
bubble's boundary.  The same addresses name bubbles of the quadratic model
and of any cubic in the family, which is what makes the model conjugacy a
pure bookkeeping exercise on top of the linearizers.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .linearize import Linearizer, boundary, build_linearizer, critical_prefix
from .maps import CubicSiegel, QuadraticSiegel


class CriticalCollision(Exception):
    """A pullback ran into the free critical value: the tree is blocked here."""


class AddressBlocked(Exception):
    """The requested address is missing from the constructed tree."""


def shift_address(address: tuple) -> tuple:
    """Image address under f: decrement the leading entry, or drop a zero."""
    if not address:
        return ()
    if address[0] > 0:
        return (address[0] - 1,) + address[1:]
    return address[1:]


def address_generation(address: tuple) -> int:
    return len(address) + sum(address)


def _tree_preimage_addresses(address: tuple) -> list[tuple]:
    """The (at most two) attached addresses mapping onto this one."""
    out = [(0,) + tuple(address)]
    if address:
        out.append((address[0] + 1,) + tuple(address[1:]))
    return out


def _quad_preimages(lam: complex, ys: np.ndarray) -> np.ndarray:
    # -lam/2 z^2 + lam z - y = 0
    ys = np.asarray(ys, dtype=complex)
    disc = np.sqrt(1.0 - 2.0 * ys / lam)
    return np.stack([1.0 - disc, 1.0 + disc])


def _cubic_preimages(lam: complex, bc: complex, ys: np.ndarray) -> np.ndarray:
    # lam/3 z^3 - lam*bc/2 z^2 + lam z - y = 0, solved as a depressed cubic
    ys = np.asarray(ys, dtype=complex)
    p2 = -1.5 * bc
    p1 = 3.0 + 0j
    p0 = -3.0 * ys / lam
    shift = p2 / 3.0
    p = p1 - p2 * p2 / 3.0
    q = 2.0 * p2 ** 3 / 27.0 - p2 * p1 / 3.0 + p0
    disc = np.sqrt(q * q / 4.0 + p ** 3 / 27.0)
    u3 = -q / 2.0 + disc
    small = np.abs(u3) < 1e-30
    u3 = np.where(small, -q / 2.0 - disc, u3)
    u = u3 ** (1.0 / 3.0)
    omega = cmath.exp(2j * math.pi / 3)
    roots = []
    for k in range(3):
        uk = u * omega ** k
        roots.append(uk - p / (3.0 * uk) - shift)
    return np.stack(roots)


def _preimages(fmap, ys) -> np.ndarray:
    """All f-preimages of each target, shape (degree, len(ys)), polished."""
    ys = np.atleast_1d(np.asarray(ys, dtype=complex))
    if fmap.degree == 2:
        roots = _quad_preimages(fmap.lam, ys)
    else:
        roots = _cubic_preimages(fmap.lam, fmap.bcoeff, ys)
    for _ in range(2):  # Newton polish kills the closed-form roundoff
        fr = fmap.eval(roots)
        dr = fmap.deriv(roots)
        dr = np.where(np.abs(dr) < 1e-300, 1.0, dr)
        roots = roots - (fr - ys[None, :]) / dr
    return roots


def _point_in_polygon(poly: np.ndarray, z: complex) -> bool:
    x, y = z.real, z.imag
    px, py = poly.real, poly.imag
    qx, qy = np.roll(px, -1), np.roll(py, -1)
    straddle = (py > y) != (qy > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xcross = px + (y - py) * (qx - px) / (qy - py)
    return bool(np.count_nonzero(straddle & (xcross > x)) % 2)


@dataclass(frozen=True)
class Bubble:
    """One preimage component: center, root joint, boundary polygon."""

    address: tuple | None      # None for components detached from the tree
    generation: int
    center: complex
    root: complex | None
    polygon: np.ndarray | None
    attached: bool

    def contains(self, z: complex) -> bool:
        if self.polygon is None:
            return False
        return _point_in_polygon(self.polygon, complex(z))

    def diameter(self) -> float:
        if self.polygon is None:
            return 0.0
        return 2.0 * float(np.max(np.abs(self.polygon - self.center)))


class BubbleTree:
    """Bubbles of generation <= max_gen, addressed; plus detached counts.

    The disk polygon is sampled on the linearizer circle slightly inside the
    critical radius; joints live on that same inset curve so every root sits
    on its parent's polygon by construction.
    """

    def __init__(self, fmap, max_gen: int, samples: int = 512,
                 n_coeffs: int = 1024, inset: float = 0.008,
                 strict: bool = True):
        if max_gen > 8:
            raise ValueError("desk scale stops at generation 8")
        self.fmap = fmap
        self.max_gen = max_gen
        self.samples = samples
        self.lin = build_linearizer(fmap, n_coeffs=n_coeffs)
        wstar = critical_prefix(self.lin)
        if wstar is None:
            raise CriticalCollision("no critical point found on the disk boundary")
        self.wstar = wstar
        self.radius = abs(wstar) * (1.0 - inset)
        self.theta = float(fmap.rotation.theta)
        angles = np.exp(2j * np.pi * np.arange(samples) / samples)
        disk_poly = self.lin.eval(self.radius * angles)
        disk = Bubble(address=(), generation=0, center=0j, root=None,
                      polygon=disk_poly, attached=True)
        self.bubbles: dict[tuple, Bubble] = {(): disk}
        self.blocked: set[tuple] = set()
        self.counts: dict[int, int] = {0: 1}
        self.detached_centers: dict[int, list[complex]] = {}
        self._wcoords: dict[tuple, np.ndarray] = {(): self.radius * angles}
        self._build(strict=strict)

    # -- joints ------------------------------------------------------------

    def boundary_orbit_point(self, n: int) -> complex:
        """c_{-n}: the n-th backward boundary-orbit point of the critical
        point, taken on the inset sampling curve."""
        w = self.wstar * (self.radius / abs(self.wstar))
        return complex(self.lin.eval(w * cmath.exp(-2j * math.pi * self.theta * n)))

    def joint(self, address: tuple, n: int) -> complex:
        """The n-th joint on the boundary of the bubble at `address`."""
        return self.lift_point(address, self.boundary_orbit_point(n))

    # -- inverse branches --------------------------------------------------

    def _chain(self, address: tuple) -> list[tuple]:
        chain = [tuple(address)]
        while chain[-1]:
            chain.append(shift_address(chain[-1]))
        return chain

    def lift_point(self, address: tuple, y: complex) -> complex:
        """Inverse of f^gen restricted to the bubble at `address`, at y."""
        chain = self._chain(address)
        z = complex(y)
        for addr in chain[-2::-1]:
            bub = self.bubbles.get(addr)
            img = self.bubbles.get(shift_address(addr))
            if bub is None or bub.polygon is None:
                raise AddressBlocked(f"address {addr} absent from the tree")
            pred = bub.polygon[int(np.argmin(np.abs(img.polygon - z)))]
            roots = _preimages(self.fmap, [z])[:, 0]
            z = complex(roots[int(np.argmin(np.abs(roots - pred)))])
        return z

    def _disk_sheet(self, indices: np.ndarray) -> np.ndarray:
        """The known f-preimage inside D of disk-polygon points (by index)."""
        w = self._wcoords[()][indices]
        return self.lin.eval(w / self.fmap.lam)

    # -- construction ------------------------------------------------------

    def _pull_polygon(self, image: Bubble, seed: complex,
                      exclude_disk_sheet: bool) -> np.ndarray:
        m = len(image.polygon)
        roots = _preimages(self.fmap, image.polygon)  # (deg, m)
        if exclude_disk_sheet:
            sheet = self._disk_sheet(np.arange(m))
            dist = np.abs(roots - sheet[None, :])
            roots = np.where(dist < 1e-7, np.inf, roots)
        start = int(np.argmin(np.abs(image.polygon - self.fmap.eval(seed))))
        out = np.empty(m, dtype=complex)
        w = seed
        for step in range(m + 1):
            j = (start + step) % m
            col = roots[:, j]
            w = complex(col[int(np.argmin(np.abs(col - w)))])
            out[j] = w
        return out

    def _make_child(self, parent: Bubble, n: int, image: Bubble) -> Bubble:
        root = self.joint(parent.address, n)
        from_disk = image.address == ()
        poly = self._pull_polygon(image, root, exclude_disk_sheet=from_disk)
        centers = _preimages(self.fmap, [image.center])[:, 0]
        inside = [c for c in centers if _point_in_polygon(poly, complex(c))]
        if len(inside) != 1:
            raise CriticalCollision(
                f"child of {parent.address} at joint {n}: expected one center, "
                f"got {len(inside)}")
        gen = parent.generation + n + 1
        return Bubble(address=parent.address + (n,), generation=gen,
                      center=complex(inside[0]), root=root, polygon=poly,
                      attached=True)

    def _build(self, strict: bool) -> None:
        lam = self.fmap.lam
        vfree = None
        if self.fmap.degree == 3:
            vfree = complex(self.fmap.eval(self.fmap.b))
        all_centers: dict[int, list[complex]] = {0: [0j]}
        for gen in range(1, self.max_gen + 1):
            # attached children: (0, A) and (a1+1, A'), built by pullback
            new_addresses = []
            for addr, bub in list(self.bubbles.items()):
                for child_addr in _tree_preimage_addresses(addr):
                    if address_generation(child_addr) == gen:
                        new_addresses.append(child_addr)
            for child_addr in new_addresses:
                image_addr = shift_address(child_addr)
                image = self.bubbles[image_addr]
                parent_addr = child_addr[:-1]
                parent = self.bubbles[parent_addr]
                if vfree is not None and image.contains(vfree):
                    self.blocked.add(child_addr)
                    if strict:
                        raise CriticalCollision(
                            f"free critical value inside bubble {image_addr}")
                    continue
                try:
                    child = self._make_child(parent, child_addr[-1], image)
                except CriticalCollision:
                    self.blocked.add(child_addr)
                    if strict:
                        raise
                    continue
                self.bubbles[child_addr] = child
                w_img = self._wcoords[image_addr]
                self._wcoords[child_addr] = w_img / lam if image_addr == () \
                    else self._wcoords[image_addr]
            # total component count: every generation-(gen-1) component has
            # `degree` preimage components when no critical value interferes
            prev = all_centers.get(gen - 1, [])
            cur: list[complex] = []
            for c in prev:
                roots = _preimages(self.fmap, [c])[:, 0]
                for r in roots:
                    if gen == 1 and abs(r) < 1e-9:
                        continue  # the disk is its own preimage component
                    cur.append(complex(r))
            # dedup (coincident centers would mean merged components)
            kept: list[complex] = []
            for c in cur:
                if all(abs(c - k) > 1e-9 for k in kept):
                    kept.append(c)
            all_centers[gen] = kept
            self.counts[gen] = len(kept)
            tree_centers = [b.center for a, b in self.bubbles.items()
                            if b.generation == gen]
            self.detached_centers[gen] = [
                c for c in kept
                if all(abs(c - t) > 1e-9 for t in tree_centers)]

    # -- queries -------------------------------------------------------------

    def bubble(self, address: tuple) -> Bubble:
        addr = tuple(address)
        if addr in self.blocked:
            raise AddressBlocked(f"address {addr} is blocked by the critical value")
        if addr not in self.bubbles:
            raise AddressBlocked(f"address {addr} not in the tree (max_gen "
                                 f"{self.max_gen})")
        return self.bubbles[addr]

    def locate(self, z: complex) -> tuple | None:
        """Address of the tree bubble containing z, or None."""
        for addr, bub in self.bubbles.items():
            if bub.contains(z):
                return addr
        return None

    def new_per_generation(self) -> list[int]:
        return [self.counts[g] for g in sorted(self.counts) if g > 0]


def build_tree(fmap, max_gen: int, **kwargs) -> BubbleTree:
    """All bubbles of generation <= max_gen; see BubbleTree."""
    return BubbleTree(fmap, max_gen, **kwargs)


def bubble_children(fmap, bubble: Bubble, tree: BubbleTree) -> list[Bubble]:
    """All components of f^{-1}(bubble), attached ones first.

    Attached components carry extended addresses and full polygons; detached
    ones get center-seeded polygons and address None.
    """
    if bubble.address is None:
        raise AddressBlocked("children are tracked for tree bubbles only")
    vfree = complex(fmap.eval(fmap.b)) if fmap.degree == 3 else None
    if vfree is not None and bubble.contains(vfree):
        raise CriticalCollision(
            f"free critical value inside bubble {bubble.address}")
    out: list[Bubble] = []
    taken: list[complex] = []
    if bubble.address == ():
        taken.append(0j)  # the disk itself
    for child_addr in _tree_preimage_addresses(bubble.address):
        parent = tree.bubble(child_addr[:-1])
        child = tree._make_child(parent, child_addr[-1], bubble)
        out.append(child)
        taken.append(child.center)
    centers = _preimages(fmap, [bubble.center])[:, 0]
    for c in centers:
        if any(abs(c - t) <= 1e-9 for t in taken):
            continue
        poly = _detached_polygon(fmap, bubble, complex(c))
        out.append(Bubble(address=None, generation=bubble.generation + 1,
                          center=complex(c), root=None, polygon=poly,
                          attached=False))
    return out


def _detached_polygon(fmap, image: Bubble, center: complex) -> np.ndarray:
    """Polygon of the preimage component around `center`, seeded radially."""
    # walk the inverse branch outward from the center preimage first
    k = 12
    seg = image.center + (image.polygon[0] - image.center) * \
        (np.arange(1, k + 1) / k)
    w = center
    for y in seg:
        roots = _preimages(fmap, [y])[:, 0]
        w = complex(roots[int(np.argmin(np.abs(roots - w)))])
    m = len(image.polygon)
    roots = _preimages(fmap, image.polygon)
    out = np.empty(m, dtype=complex)
    for step in range(m + 1):
        j = step % m
        col = roots[:, j]
        w = complex(col[int(np.argmin(np.abs(col - w)))])
        out[j] = w
    return out


# ---------------------------------------------------------------------------
# the quadratic-model conjugacy


def _lin_inverse(lin: Linearizer, z: complex, seed: complex | None = None) -> complex:
    w = complex(z) if seed is None else complex(seed)
    for _ in range(60):
        err = complex(lin.eval(w)) - z
        if abs(err) <= 1e-13 * max(1.0, abs(z)):
            return w
        dw = complex(lin.deriv(w))
        if dw == 0:
            break
        w = w - err / dw
    raise ValueError(f"linearizer inversion stalled at z = {z}")


class ModelConjugacy:
    """psi: tree of f_b -> tree of q_theta, address by address.

    On the disk, psi = sigma_q ( (w*_q / w*_b) sigma_b^{-1}(z) ): both
    linearizers normalized so the boundary critical point is the 1-prefix.
    On a deeper bubble, conjugate through f^gen, transfer on the disk, and
    lift through the model chain: psi|_B = (q^gen|_B')^{-1} o psi|_D o f^gen|_B.
    """

    def __init__(self, source: BubbleTree, model: BubbleTree):
        if model.fmap.degree != 2:
            raise ValueError("the model tree must belong to the quadratic")
        self.source = source
        self.model = model
        self.scale = model.wstar / source.wstar

    def point(self, address: tuple, z: complex) -> complex:
        addr = tuple(address)
        src = self.source.bubble(addr)  # raises AddressBlocked if missing
        self.model.bubble(addr)
        w = complex(z)
        for _ in range(src.generation):
            w = complex(self.source.fmap.eval(w))
        w = _lin_inverse(self.source.lin, w)
        y = complex(self.model.lin.eval(self.scale * w))
        return self.model.lift_point(addr, y)


def build_conjugacy(fmap, max_gen: int, **kwargs) -> ModelConjugacy:
    source = build_tree(fmap, max_gen, **kwargs)
    model = build_tree(QuadraticSiegel(fmap.rotation), max_gen, **kwargs)
    return ModelConjugacy(source, model)


def psi_point(conjugacy: ModelConjugacy, address: tuple, z: complex) -> complex:
    """Model image of a tree point; see ModelConjugacy.point."""
    return conjugacy.point(address, z)


# ---------------------------------------------------------------------------
# bubble rays


@dataclass(frozen=True)
class BubbleRay:
    """A chain of bubbles extending one address entry per step."""

    stream: tuple
    addresses: tuple
    diameters: tuple
    status: str                 # "landed" | "truncated"
    point: complex | None = None


def trace_bubble_ray(fmap, stream, depth: int, tree: BubbleTree | None = None,
                     landing_tol: float = 1e-4) -> BubbleRay:
    """Follow the bubble chain picked out by `stream` for `depth` bubbles.

    The chain's closed bubbles shrink toward the landing point; we report
    Landed once the current bubble's diameter (plus its distance to the next
    root) drops below `landing_tol`, estimating the point by the last root.
    """
    stream = tuple(stream)
    if len(stream) < depth:
        raise ValueError("stream shorter than the requested depth")
    gen_needed = address_generation(stream[:depth])
    if tree is None:
        tree = build_tree(fmap, min(8, gen_needed))
    addresses = [stream[:k] for k in range(depth + 1)]
    diam = []
    last_root = None
    for addr in addresses:
        bub = tree.bubble(addr)
        diam.append(bub.diameter())
        last_root = bub.root if bub.root is not None else last_root
    if diam and diam[-1] <= landing_tol:
        return BubbleRay(stream=stream, addresses=tuple(addresses),
                         diameters=tuple(diam), status="landed",
                         point=last_root)
    return BubbleRay(stream=stream, addresses=tuple(addresses),
                     diameters=tuple(diam), status="truncated")


def cocritical_bubble(fmap, max_gen: int, tree: BubbleTree | None = None):
    """Address of the tree bubble containing the co-critical point, or None."""
    if fmap.degree != 3:
        raise ValueError("the co-critical point belongs to the cubic family")
    if tree is None:
        tree = build_tree(fmap, max_gen, strict=False)
    return tree.locate(fmap.cocritical())
