/**
 * Prime-field arithmetic and threshold sharing over 2^61 - 1 (BigInt).
 *
 * This is the client half of the vault's sharing scheme: a secret becomes
 * the constant term of a random polynomial of degree k-1 and each node i
 * receives the evaluation at x = i. Only reconstruction at x = 0 is needed
 * in the browser (reading back one's own notes).
 */

export const P: bigint = (1n << 61n) - 1n;
export const NODE_COUNT = 5;

export function mod(a: bigint, p: bigint = P): bigint {
	const r = a % p;
	return r < 0n ? r + p : r;
}

export function modpow(base: bigint, exp: bigint, p: bigint = P): bigint {
	let result = 1n;
	base = mod(base, p);
	while (exp > 0n) {
		if (exp & 1n) result = (result * base) % p;
		base = (base * base) % p;
		exp >>= 1n;
	}
	return result;
}

export function inv(a: bigint, p: bigint = P): bigint {
	if (mod(a, p) === 0n) throw new Error('zero has no inverse');
	return modpow(a, p - 2n, p);
}

export function polyEval(coeffs: bigint[], x: bigint, p: bigint = P): bigint {
	let acc = 0n;
	for (let i = coeffs.length - 1; i >= 0; i--) {
		acc = mod(acc * x + coeffs[i], p);
	}
	return acc;
}

/** Uniform element of Z_p via rejection sampling of 61-bit draws. */
export function randomElement(p: bigint = P): bigint {
	const buf = new Uint8Array(8);
	for (;;) {
		crypto.getRandomValues(buf);
		let v = 0n;
		for (const b of buf) v = (v << 8n) | BigInt(b);
		v &= (1n << 61n) - 1n;
		if (v < p) return v;
	}
}

export interface Share {
	i: number;
	v: bigint;
}

export function share(secret: bigint, k: number, n: number = NODE_COUNT, p: bigint = P): Share[] {
	if (k < 1 || k > n) throw new Error(`bad threshold k=${k}, n=${n}`);
	const coeffs = [mod(secret, p)];
	for (let d = 1; d < k; d++) coeffs.push(randomElement(p));
	const out: Share[] = [];
	for (let i = 1; i <= n; i++) out.push({ i, v: polyEval(coeffs, BigInt(i), p) });
	return out;
}

/** Lagrange interpolation at x = 0; uses the first k shares and checks the rest. */
export function reconstruct(shares: Share[], k: number, p: bigint = P): bigint {
	const sorted = [...shares].sort((a, b) => a.i - b.i);
	if (new Set(sorted.map((s) => s.i)).size !== sorted.length) throw new Error('duplicate share index');
	if (sorted.length < k) throw new Error(`need ${k} shares, got ${sorted.length}`);
	const base = sorted.slice(0, k);
	const at = (x: bigint): bigint => {
		let acc = 0n;
		for (const s of base) {
			let num = 1n;
			let den = 1n;
			for (const t of base) {
				if (t.i === s.i) continue;
				num = mod(num * (x - BigInt(t.i)), p);
				den = mod(den * BigInt(s.i - t.i), p);
			}
			acc = mod(acc + s.v * num % p * inv(den, p), p);
		}
		return acc;
	};
	for (const extra of sorted.slice(k)) {
		if (at(BigInt(extra.i)) !== extra.v) throw new Error(`share ${extra.i} off-polynomial`);
	}
	return at(0n);
}
