/**
 * Envelope format and canonical JSON, byte-compatible with the node side.
 *
 * Canonical form: recursively sorted keys, no whitespace, non-ASCII escaped
 * as \uXXXX - the exact bytes both ends MAC.
 */

export interface Envelope {
	v: number;
	session: string;
	seq: number;
	from: string;
	to: string;
	kind: string;
	body: Record<string, unknown>;
	mac: string;
}

function asciiString(s: string): string {
	return JSON.stringify(s).replace(/[-￿]/g, (ch) => '\\u' + ch.charCodeAt(0).toString(16).padStart(4, '0'));
}

export function canonical(value: unknown): string {
	if (value === null || typeof value === 'number' || typeof value === 'boolean') {
		return JSON.stringify(value);
	}
	if (typeof value === 'string') return asciiString(value);
	if (Array.isArray(value)) return '[' + value.map(canonical).join(',') + ']';
	const obj = value as Record<string, unknown>;
	return (
		'{' +
		Object.keys(obj)
			.sort()
			.map((k) => asciiString(k) + ':' + canonical(obj[k]))
			.join(',') +
		'}'
	);
}

export function signingForm(env: Envelope): Uint8Array {
	return new TextEncoder().encode(
		canonical({ v: env.v, session: env.session, seq: env.seq, from: env.from, to: env.to, kind: env.kind, body: env.body }),
	);
}

export async function macEnvelope(env: Envelope, key: Uint8Array): Promise<Envelope> {
	const cryptoKey = await crypto.subtle.importKey('raw', key as BufferSource, { name: 'HMAC', hash: 'SHA-256' }, false, ['sign']);
	const sig = new Uint8Array(await crypto.subtle.sign('HMAC', cryptoKey, signingForm(env) as BufferSource));
	return { ...env, mac: Array.from(sig, (b) => b.toString(16).padStart(2, '0')).join('') };
}

export async function verifyEnvelope(env: Envelope, key: Uint8Array): Promise<void> {
	const expected = (await macEnvelope(env, key)).mac;
	if (expected !== env.mac) throw new Error(`envelope MAC mismatch on ${env.kind}`);
}
