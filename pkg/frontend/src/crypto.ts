/**
 * WebCrypto wrappers matching the node side byte for byte: AES-256-GCM with
 * a 12-byte nonce prefix, HKDF-SHA256, X25519 sealed boxes, Ed25519
 * identities, and zlib compression via CompressionStream.
 */

import { concatBytes, fromHex, utf8 } from './encoding.js';

const subtle = crypto.subtle;

export async function hkdf(secret: Uint8Array, salt: Uint8Array, info: Uint8Array, length = 32): Promise<Uint8Array> {
	const key = await subtle.importKey('raw', secret as BufferSource, 'HKDF', false, ['deriveBits']);
	const bits = await subtle.deriveBits(
		{ name: 'HKDF', hash: 'SHA-256', salt: salt as BufferSource, info: info as BufferSource }, key, length * 8);
	return new Uint8Array(bits);
}

export async function aeadEncrypt(key: Uint8Array, plaintext: Uint8Array): Promise<Uint8Array> {
	const nonce = crypto.getRandomValues(new Uint8Array(12));
	const aesKey = await subtle.importKey('raw', key as BufferSource, { name: 'AES-GCM' }, false, ['encrypt']);
	const ct = new Uint8Array(await subtle.encrypt({ name: 'AES-GCM', iv: nonce as BufferSource }, aesKey, plaintext as BufferSource));
	return concatBytes(nonce, ct);
}

export async function aeadDecrypt(key: Uint8Array, blob: Uint8Array): Promise<Uint8Array> {
	const aesKey = await subtle.importKey('raw', key as BufferSource, { name: 'AES-GCM' }, false, ['decrypt']);
	const plain = await subtle.decrypt(
		{ name: 'AES-GCM', iv: blob.slice(0, 12) as BufferSource }, aesKey, blob.slice(12) as BufferSource);
	return new Uint8Array(plain);
}

/** Sealed box: ephemeral X25519 + HKDF + AES-GCM; layout eph_pub || nonce || ct. */
export async function seal(recipientPubRaw: Uint8Array, plaintext: Uint8Array): Promise<Uint8Array> {
	const eph = (await subtle.generateKey({ name: 'X25519' }, true, ['deriveBits'])) as CryptoKeyPair;
	const ephPub = new Uint8Array(await subtle.exportKey('raw', eph.publicKey));
	const peer = await subtle.importKey('raw', recipientPubRaw as BufferSource, { name: 'X25519' }, false, []);
	const shared = new Uint8Array(await subtle.deriveBits({ name: 'X25519', public: peer }, eph.privateKey, 256));
	const key = await hkdf(shared, concatBytes(ephPub, recipientPubRaw), utf8('qv-sealed-v1'));
	return concatBytes(ephPub, await aeadEncrypt(key, plaintext));
}

export async function unseal(recipientPriv: CryptoKey, recipientPubRaw: Uint8Array, blob: Uint8Array): Promise<Uint8Array> {
	const ephPub = blob.slice(0, 32);
	const peer = await subtle.importKey('raw', ephPub as BufferSource, { name: 'X25519' }, false, []);
	const shared = new Uint8Array(await subtle.deriveBits({ name: 'X25519', public: peer }, recipientPriv, 256));
	const key = await hkdf(shared, concatBytes(ephPub, recipientPubRaw), utf8('qv-sealed-v1'));
	return aeadDecrypt(key, blob.slice(32));
}

export async function importSignKey(pkcs8b64: string): Promise<CryptoKey> {
	const der = Uint8Array.from(atob(pkcs8b64), (c) => c.charCodeAt(0));
	return subtle.importKey('pkcs8', der as BufferSource, { name: 'Ed25519' }, false, ['sign']);
}

export async function importBoxKey(pkcs8b64: string): Promise<CryptoKey> {
	const der = Uint8Array.from(atob(pkcs8b64), (c) => c.charCodeAt(0));
	return subtle.importKey('pkcs8', der as BufferSource, { name: 'X25519' }, false, ['deriveBits']);
}

export async function sign(key: CryptoKey, data: Uint8Array): Promise<string> {
	const sig = new Uint8Array(await subtle.sign({ name: 'Ed25519' }, key, data as BufferSource));
	return Array.from(sig, (b) => b.toString(16).padStart(2, '0')).join('');
}

export async function verifyNodeSig(nodePkHex: string, sigHex: string, data: Uint8Array): Promise<boolean> {
	const key = await subtle.importKey('raw', fromHex(nodePkHex) as BufferSource, { name: 'Ed25519' }, false, ['verify']);
	return subtle.verify({ name: 'Ed25519' }, key, fromHex(sigHex) as BufferSource, data as BufferSource);
}

async function pipe(data: Uint8Array, stream: CompressionStream | DecompressionStream): Promise<Uint8Array> {
	const writer = stream.writable.getWriter();
	void writer.write(data as BufferSource);
	void writer.close();
	const parts: Uint8Array[] = [];
	const reader = stream.readable.getReader();
	for (;;) {
		const { done, value } = await reader.read();
		if (done) break;
		parts.push(new Uint8Array(value));
	}
	return concatBytes(...parts);
}

export function compress(data: Uint8Array): Promise<Uint8Array> {
	return pipe(data, new CompressionStream('deflate')); // zlib-wrapped, as the nodes expect
}

export function decompress(data: Uint8Array): Promise<Uint8Array> {
	return pipe(data, new DecompressionStream('deflate'));
}

export function randomKey(): Uint8Array {
	return crypto.getRandomValues(new Uint8Array(32));
}

export function randomHex(bytes: number): string {
	return Array.from(crypto.getRandomValues(new Uint8Array(bytes)), (b) => b.toString(16).padStart(2, '0')).join('');
}
